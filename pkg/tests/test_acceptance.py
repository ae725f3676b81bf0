"""Acceptance suite: one test per criterion, each recording a pass/fail line.

Monte Carlo seeds are fixed constants chosen before any run and never tuned.
"""
from __future__ import annotations

import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

from lsseries.approx import approx_report
from lsseries.bases import BasisSpec, diagnostics, gram, make_basis
from lsseries.cli import run
from lsseries.experiments import DgpSpec, run_study, simulate
from lsseries.numutil import RandomStream, composite_gauss_legendre, gauss_legendre, operator_norm
from lsseries.regression import Dataset, fit

SEED = 0
WORKERS = os.cpu_count() or 1


def in_band(ratios, lo=1.6, hi=2.6) -> bool:
    return all(lo <= r <= hi for r in ratios)


def fmt(values) -> str:
    return "[" + ", ".join(f"{v:.3f}" for v in values) + "]"


def test_c1_solver_oracle_equivalence(criterion):
    rng = np.random.default_rng(SEED)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        k = int(rng.integers(1, 26))
        n = int(rng.integers(max(10 * k, 50), 501))
        family = str(rng.choice(["legendre", "fourier", "bspline"]))
        if family == "fourier":
            k -= 1 - k % 2
        elif family == "bspline":
            k = max(k, 5)
        b = make_basis(BasisSpec(family, k))
        x = rng.random(n)
        y = np.cos(3 * x) + rng.standard_normal(n)
        res = fit(Dataset(x, y), b)
        P = b.eval(x)
        oracle = np.linalg.solve(P.T @ P, P.T @ y)
        worst = max(worst, float(np.max(np.abs(res.beta_hat - oracle)) / (1.0 + np.max(np.abs(oracle)))))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and elapsed < 10
    criterion(1, ok, f"max rel diff {worst:.2e} (<= 1e-10), {elapsed:.2f}s (< 10s)")
    assert ok


def test_c2_closed_form_approximation(criterion):
    t0 = time.perf_counter()
    rep = approx_report(lambda X: np.asarray(X)[:, 0] ** 2, make_basis(BasisSpec("legendre", 2)), gauss_legendre(1))
    elapsed = time.perf_counter() - t0
    e1 = abs(rep.c_k_hat - 1 / math.sqrt(180))
    e2 = abs(rep.sup_err - 1 / 6)
    e3 = abs(rep.lebesgue_factor - math.sqrt(5))
    ok = e1 <= 1e-6 and e2 <= 1e-6 and e3 <= 1e-5 and elapsed < 1
    criterion(2, ok, f"|dc|={e1:.1e} |dsup|={e2:.1e} |dL|={e3:.1e}, {elapsed:.3f}s")
    assert ok


def test_c3_basis_exactness(criterion):
    t0 = time.perf_counter()
    gram_err = 0.0
    for spec in (BasisSpec("legendre", 12), BasisSpec("fourier", 11), BasisSpec("bspline", 10, orthonormal=True),
                 BasisSpec("local_poly_partition", 12, order=2)):
        b = make_basis(spec)
        bp = b.breakpoints() if hasattr(b, "breakpoints") else None
        q = composite_gauss_legendre(bp, 20) if bp is not None and len(bp) > 2 else gauss_legendre(1)
        gram_err = max(gram_err, float(np.max(np.abs(gram(b, q) - np.eye(b.k)))))
    x = np.linspace(0, 1, 2001)
    pu = max(float(np.max(np.abs(make_basis(BasisSpec("bspline", 12, order=o)).eval(x).sum(axis=1) - 1)))
             for o in (1, 2, 3, 4))
    fd_ratio = 0.0
    for spec in (BasisSpec("legendre", 10), BasisSpec("fourier", 9), BasisSpec("bspline", 10, order=3)):
        b = make_basis(spec)
        xi = diagnostics(b).xi_k
        pts = np.linspace(0.013, 0.987, 157)
        if hasattr(b, "breakpoints"):
            pts = pts[np.min(np.abs(pts[:, None] - b.breakpoints()[None, :]), axis=1) > 1e-3]
        h = 1e-6
        fd = (b.eval(pts + h) - b.eval(pts - h)) / (2 * h)
        fd_ratio = max(fd_ratio, float(np.max(np.abs(b.eval_deriv(pts) - fd)) / (1e-5 * xi)))
    xi_err = max(abs(diagnostics(make_basis(BasisSpec("legendre", 3))).xi_k - 3.0),
                 abs(diagnostics(make_basis(BasisSpec("fourier", 5))).xi_k - math.sqrt(5)))
    elapsed = time.perf_counter() - t0
    ok = gram_err <= 1e-8 and pu <= 1e-12 and fd_ratio <= 1 and xi_err <= 1e-6 and elapsed < 30
    criterion(3, ok, f"gram {gram_err:.1e}, unity {pu:.1e}, fd/(1e-5 xi) {fd_ratio:.2f}, xi {xi_err:.1e}, {elapsed:.1f}s")
    assert ok


@pytest.mark.slow
def test_c4_l2_rate(criterion):
    rep = run_study("rate", {"reps": 200}, seed=SEED, workers=WORKERS)
    r = rep.summary["l2_ratios"]
    ok = in_band(r)
    criterion(4, ok, f"l2 ratios {fmt(r)} in [1.6, 2.6]")
    assert ok


@pytest.mark.slow
def test_c5_matrix_lln(criterion):
    rep = run_study("matrix", {"reps": 200}, seed=SEED, workers=WORKERS)
    spread = rep.summary["ratio_Q_k_max_over_min"]
    b = make_basis(BasisSpec("legendre", 5))
    data, _ = simulate(DgpSpec("linear"), 100_000, RandomStream(SEED, 99))
    dev = operator_norm(fit(data, b).Omega_hat - np.eye(5))
    ok = spread <= 4 and dev <= 0.3
    criterion(5, ok, f"Q ratio max/min {spread:.2f} (<= 4), ||Omega_hat - I|| {dev:.4f} at n=1e5 (<= 0.3)")
    assert ok


@pytest.mark.slow
def test_c6_pointwise_normality(criterion):
    rep = run_study("normality", {"n": 2000, "k": 8, "reps": 2000, "x_points": [0.5]}, seed=SEED, workers=WORKERS)
    ks = rep.summary["max_ks_feasible"]
    ok = ks <= 0.05
    criterion(6, ok, f"KS {ks:.4f} (<= 0.05)")
    assert ok


@pytest.mark.slow
def test_c7_uniform_coverage(criterion):
    rep = run_study("coverage", {"n": 500, "k": 12, "alphas": [0.05, 0.50], "reps": 500, "R": 2000},
                    seed=SEED, workers=WORKERS)
    cov = rep.summary["uniform_coverage"]
    c95, c50 = cov[0.05], cov[0.5]
    ok = 0.90 <= c95 <= 0.98 and 0.43 <= c50 <= 0.57
    criterion(7, ok, f"coverage {c95:.3f} at 0.95 (in [0.90, 0.98]), {c50:.3f} at 0.50 (in [0.43, 0.57])")
    assert ok


@pytest.mark.slow
def test_c8_bootstrap_agreement(criterion):
    rep = run_study("bootstrap_agreement", {"n": 2000, "k": 8, "R": 2000, "B": 2000, "reps": 100},
                    seed=SEED, workers=WORKERS)
    d = rep.summary["mean_abs_diff"]
    ok = d <= 0.15
    criterion(8, ok, f"mean |c_m - c_b| {d:.4f} (<= 0.15)")
    assert ok


@pytest.mark.slow
def test_c9_misspecification(criterion):
    rep = run_study("misspecification", {"reps": 500, "R": 2000}, seed=SEED, workers=WORKERS)
    ratios = rep.summary["surrogate_l2_ratios"]
    c_k = rep.summary["c_k_hat"]
    truth = rep.column("mean_l2_truth")
    cov = rep.column("uniform_coverage_surrogate")
    ok = in_band(ratios) and bool(np.all(truth >= c_k)) and bool(np.all((cov >= 0.90) & (cov <= 0.98)))
    criterion(9, ok, f"surrogate ratios {fmt(ratios)}, truth error {fmt(truth)} >= c_k {c_k:.4f}, "
                     f"surrogate coverage {fmt(cov)}")
    assert ok


@pytest.mark.slow
def test_c10_linearization(criterion):
    rep = run_study("linearization", {"reps": 200}, seed=SEED, workers=WORKERS)
    r2 = rep.summary["max_R2"]
    shrink = rep.summary["q90_R1_shrink"]
    ok = r2 <= 1e-8 and in_band(shrink)
    criterion(10, ok, f"max |R2| {r2:.1e} (<= 1e-8), q90 |R1| shrink {fmt(shrink)} in [1.6, 2.6]")
    assert ok


def _cli_outputs(tmp: Path, tag: str, workers: int = 1) -> dict[str, bytes]:
    out: dict[str, bytes] = {}
    for name, cmd in (("fit", "fit"), ("band", "band"), ("pw", "pointwise"), ("diag", "diagnostics"),
                      ("ap", "approx"), ("mc", "mc")):
        d = tmp / f"{tag}_{name}"
        code = run([cmd, "--config", str(tmp / f"{name}.toml"), "--seed", "11", "--out", str(d),
                    "--workers", str(workers)])
        assert code == 0, (cmd, code)
        for p in sorted(d.iterdir()):
            out[f"{name}/{p.name}"] = p.read_bytes()
    return out


def test_c11_determinism(criterion, tmp_path):
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)
    x = rng.random(300)
    y = np.sin(2 * np.pi * x) + 0.3 * rng.standard_normal(300)
    (tmp_path / "data.csv").write_text(
        "x,y\n" + "".join(f"{float(a)!r},{float(b)!r}\n" for a, b in zip(x, y)), encoding="utf-8")
    base = '[io]\ninput = "data.csv"\n[basis]\nfamily = "bspline"\nk = 8\n'
    configs = {
        "fit": base,
        "band": base + "[functional]\ngrid_points = 51\n[inference]\nR = 500\n",
        "pw": base + '[functional]\nkind = "partial_derivative"\ngrid_points = 11\n',
        "diag": base,
        "ap": '[approx]\nbases = [{family = "bspline", k = 8}, {family = "legendre", k = 8}]\n',
        "mc": '[mc]\nstudy = "rate"\nreps = 16\nschedule = [[200, 4], [800, 4]]\n',
    }
    for name, body in configs.items():
        (tmp_path / f"{name}.toml").write_text(body, encoding="utf-8")
    first = _cli_outputs(tmp_path, "a")
    second = _cli_outputs(tmp_path, "b", workers=2)
    cli_ok = first == second
    studies = {
        "rate": {"reps": 16, "schedule": [[200, None], [800, None]]},
        "linearization": {"reps": 200, "n_values": [200, 800]},
        "coverage": {"reps": 500, "R": 200, "grid_points": 41},
    }
    study_ok = True
    for name, params in studies.items():
        one = run_study(name, params, seed=SEED, workers=1).to_dict()
        eight = run_study(name, params, seed=SEED, workers=8).to_dict()
        study_ok &= one == eight
    elapsed = time.perf_counter() - t0
    ok = cli_ok and study_ok and elapsed < 60
    criterion(11, ok, f"CLI reruns identical: {cli_ok} ({len(first)} files), studies 1 vs 8 workers identical: "
                      f"{study_ok}, {elapsed:.1f}s")
    assert ok
