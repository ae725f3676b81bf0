"""Monte Carlo studies of rates, normality, linearization, matrix estimation, and band coverage.

Every study takes a master ``seed``; cell i, replication r draws from
``RandomStream(seed, i).child(r)`` and its children, so aggregates are
identical for any ``workers`` count.
"""

from __future__ import annotations

import inspect
import math
from dataclasses import replace
from functools import lru_cache

import numpy as np
from scipy import stats

from ..approx import approx_report
from ..bases import Basis, BasisSpec, diagnostics, make_basis
from ..errors import InsufficientReps, InvalidConfig, UnknownStudy
from ..functionals import FunctionalSpec, LoadingSet, build_loadings, projection_coefficients, sigma_theta_hat
from ..inference import (
    bootstrap_sup_stats,
    multiplier_sup_stats,
    normal_quantile,
    upper_order_statistic,
)
from ..numutil import (
    Quadrature,
    RandomStream,
    composite_gauss_legendre,
    gauss_legendre,
    operator_norm,
    uniform_grid,
)
from ..regression import fit
from .dgp import DgpSpec, simulate
from .harness import McReport, binomial_se, loglog_slope, run_reps, successes

L2_NODES_1D = 400


def _with_k(spec: BasisSpec, k: int | None) -> BasisSpec:
    if k is None or spec.family in ("tensor", "additive"):
        return spec
    return replace(spec, k=int(k))


@lru_cache(maxsize=64)
def _basis(spec: BasisSpec) -> Basis:
    return make_basis(spec)


@lru_cache(maxsize=64)
def _truth_quadrature(spec: BasisSpec, dim: int) -> Quadrature:
    """Quadrature for truth computations: composite across knots for piecewise bases."""
    basis = _basis(spec)
    if dim == 1 and hasattr(basis, "breakpoints"):
        bp = basis.breakpoints()
        per = max(10, math.ceil(L2_NODES_1D / (len(bp) - 1)))
        return composite_gauss_legendre(bp, per)
    return gauss_legendre(dim, L2_NODES_1D if dim == 1 else None)


def _sup_grid(dim: int) -> np.ndarray:
    return uniform_grid({1: 2001, 2: 201, 3: 41}[dim], dim)


def omega_truth(dgp: DgpSpec, basis: Basis, F: Quadrature) -> np.ndarray:
    """Q^{-1} E[(sigma^2(x) + r(x)^2) p p'] Q^{-1} by quadrature, r the projection residual of g."""
    P = basis.eval(F.nodes)
    w = F.weights
    Q = (P * w[:, None]).T @ P
    beta = projection_coefficients(basis, dgp.g, F)
    r = dgp.g(F.nodes) - P @ beta
    S = (P * (w * (dgp.sigma_of(F.nodes) ** 2 + r**2))[:, None]).T @ P
    Qi = np.linalg.inv(Q)
    Om = Qi @ S @ Qi
    return 0.5 * (Om + Om.T)


def _stream(seed: int, cell: int, rep: int) -> RandomStream:
    return RandomStream(int(seed), cell).child(rep)


def _require_reps(reps: int, minimum: int, study: str) -> None:
    if reps < minimum:
        raise InsufficientReps(f"{study} needs reps >= {minimum}, got {reps}")


def _settings(**kw) -> dict:
    out = {}
    for k, v in kw.items():
        if isinstance(v, (DgpSpec, BasisSpec)):
            v = v.to_dict()
        out[k] = v
    return out


# ---------------------------------------------------------------------------
# L2 and sup-norm rates


def _rate_rep(task):
    dgp, spec, n, stream = task
    basis = _basis(spec)
    data, _ = simulate(dgp, n, stream)
    f = fit(data, basis)
    F = _truth_quadrature(spec, dgp.dim)
    l2 = math.sqrt(F.weights @ (basis.eval(F.nodes) @ f.beta_hat - dgp.g(F.nodes)) ** 2)
    G = _sup_grid(dgp.dim)
    sup = float(np.max(np.abs(basis.eval(G) @ f.beta_hat - dgp.g(G))))
    return l2, sup


def rate_study(
    dgp: DgpSpec,
    basis: BasisSpec,
    schedule=((500, None), (2000, None), (8000, None)),
    reps: int = 200,
    seed: int = 0,
    workers: int = 1,
) -> McReport:
    """Mean L2(F) and sup errors of g_hat per (n, k) cell, with log-log slopes against n."""
    rows = []
    for i, (n, k) in enumerate(schedule):
        spec = _with_k(basis, k)
        if n < 2 * spec.k:
            raise InvalidConfig(f"rate_study needs n >= 2k; cell ({n}, {spec.k}) violates it")
        res = run_reps(_rate_rep, [(dgp, spec, n, _stream(seed, i, r)) for r in range(reps)], workers)
        ok, failed = successes(res, f"rate cell n={n}")
        l2 = np.array([a for a, _ in ok])
        sup = np.array([b for _, b in ok])
        rows.append(
            {
                "n": n,
                "k": spec.k,
                "basis": spec.family,
                "reps": len(ok),
                "failures": failed,
                "mean_l2": float(l2.mean()),
                "se_l2": float(l2.std(ddof=1) / math.sqrt(len(l2))) if len(l2) > 1 else 0.0,
                "mean_sup": float(sup.mean()),
                "se_sup": float(sup.std(ddof=1) / math.sqrt(len(sup))) if len(sup) > 1 else 0.0,
            }
        )
    ns = [r["n"] for r in rows]
    l2m = [r["mean_l2"] for r in rows]
    supm = [r["mean_sup"] for r in rows]
    summary = {
        "l2_ratios": [l2m[i] / l2m[i + 1] for i in range(len(rows) - 1)],
        "sup_ratios": [supm[i] / supm[i + 1] for i in range(len(rows) - 1)],
    }
    if len(rows) > 1 and min(l2m) > 0:
        summary["l2_slope"] = loglog_slope(ns, l2m)
        summary["sup_slope"] = loglog_slope(ns, supm)
    return McReport(
        "rate", rows, summary, _settings(dgp=dgp, basis=basis, schedule=[list(c) for c in schedule], reps=reps, seed=seed)
    )


# ---------------------------------------------------------------------------
# pointwise normality


def _normality_rep(task):
    dgp, spec, n, xs, omega, stream = task
    basis = _basis(spec)
    data, _ = simulate(dgp, n, stream)
    f = fit(data, basis)
    P0 = basis.eval(xs)
    err = P0 @ f.beta_hat - dgp.g(xs)
    s_hat = np.sqrt(np.einsum("ij,jk,ik->i", P0, f.Omega_hat, P0) / n)
    s_orc = np.sqrt(np.einsum("ij,jk,ik->i", P0, omega, P0) / n)
    return err / s_hat, err / s_orc


def normality_study(
    dgp: DgpSpec,
    basis: BasisSpec,
    x_points=(0.5,),
    n: int = 2000,
    k: int | None = 8,
    reps: int = 2000,
    seed: int = 0,
    workers: int = 1,
) -> McReport:
    """Kolmogorov-Smirnov distance of the feasible and oracle-variance t statistics to N(0, 1)."""
    _require_reps(reps, 1000, "normality_study")
    spec = _with_k(basis, k)
    b = _basis(spec)
    xs = np.asarray(x_points, dtype=float).reshape(-1, dgp.dim)
    omega = omega_truth(dgp, b, _truth_quadrature(spec, dgp.dim))
    res = run_reps(_normality_rep, [(dgp, spec, n, xs, omega, _stream(seed, 0, r)) for r in range(reps)], workers)
    ok, failed = successes(res, "normality")
    tf = np.array([a for a, _ in ok])
    to = np.array([c for _, c in ok])
    rows = []
    for j, x in enumerate(xs):
        ksf = stats.kstest(tf[:, j], "norm").statistic
        kso = stats.kstest(to[:, j], "norm").statistic
        rows.append(
            {
                "x": float(x[0]) if dgp.dim == 1 else str(x.tolist()),
                "n": n,
                "k": spec.k,
                "reps": len(ok),
                "failures": failed,
                "ks_feasible": float(ksf),
                "ks_oracle": float(kso),
                "ks_diff": float(abs(ksf - kso)),
                "mean_t": float(tf[:, j].mean()),
                "sd_t": float(tf[:, j].std(ddof=1)),
            }
        )
    summary = {"max_ks_feasible": max(r["ks_feasible"] for r in rows), "max_ks_diff": max(r["ks_diff"] for r in rows)}
    return McReport("normality", rows, summary, _settings(dgp=dgp, basis=spec, x_points=xs.tolist(), n=n, reps=reps, seed=seed))


# ---------------------------------------------------------------------------
# linearization remainders


def _linearization_rep(task):
    dgp, spec, n, A, beta_g, stream = task
    basis = _basis(spec)
    data, eps = simulate(dgp, n, stream)
    f = fit(data, basis)
    P = f.design
    r = dgp.g(data.x) - P @ beta_g
    rn = math.sqrt(n)
    g_pu = P.T @ (eps + r) / rn
    g_pe = P.T @ eps / rn
    R1 = A @ (rn * (f.beta_hat - beta_g)) - A @ g_pu
    R2 = A @ (g_pu - g_pe)
    return np.abs(R1), np.abs(R2)


def linearization_study(
    dgp: DgpSpec,
    basis: BasisSpec,
    n_values=(500, 2000, 8000),
    k: int | None = 5,
    reps: int = 200,
    grid_points: int = 11,
    seed: int = 0,
    workers: int = 1,
) -> McReport:
    """Remainders R1 = sqrt(n) a'(b_hat - b) - a'G_n[p(e + r)] and R2 = a'G_n[p r] at a = p(x)/||p(x)||.

    The basis must be orthonormal under the design law (E[p p'] = I).
    """
    _require_reps(reps, 200, "linearization_study")
    spec = _with_k(basis, k)
    b = _basis(spec)
    F = _truth_quadrature(spec, dgp.dim)
    beta_g = projection_coefficients(b, dgp.g, F)
    rep_ = approx_report(dgp.g, b, F, 2001 if dgp.dim == 1 else 256)
    xi = diagnostics(b).xi_k
    xs = uniform_grid(grid_points, dgp.dim)
    Pg = b.eval(xs)
    A = Pg / np.linalg.norm(Pg, axis=1, keepdims=True)
    rows, per_alpha = [], []
    for i, n in enumerate(n_values):
        res = run_reps(_linearization_rep, [(dgp, spec, n, A, beta_g, _stream(seed, i, r)) for r in range(reps)], workers)
        ok, failed = successes(res, f"linearization n={n}")
        R1 = np.array([a for a, _ in ok])
        R2 = np.array([c for _, c in ok])
        q1 = np.quantile(R1, 0.9, axis=0)
        q2 = np.quantile(R2, 0.9, axis=0)
        bound = math.sqrt(xi**2 * math.log(n) / n) * (1.0 + math.sqrt(spec.k) * rep_.sup_err)
        rows.append(
            {
                "n": n,
                "k": spec.k,
                "reps": len(ok),
                "failures": failed,
                "q90_R1_mean": float(q1.mean()),
                "q90_R1_max": float(q1.max()),
                "median_R1_mean": float(np.median(R1, axis=0).mean()),
                "q90_R2_mean": float(q2.mean()),
                "max_R2": float(R2.max()),
                "bound": bound,
                "ratio_R1_bound": float(q1.max() / bound),
                "ell_c_k": rep_.sup_err,
            }
        )
        per_alpha.append({"n": n, "x": xs[:, 0].tolist(), "q90_R1": q1.tolist(), "q90_R2": q2.tolist()})
    q = [r["q90_R1_mean"] for r in rows]
    med = [r["median_R1_mean"] for r in rows]
    summary = {
        "q90_R1_shrink": [q[i] / q[i + 1] for i in range(len(q) - 1)],
        "median_R1_shrink": [med[i] / med[i + 1] for i in range(len(med) - 1)],
        "max_R2": max(r["max_R2"] for r in rows),
        "ratio_R1_bound_max": max(r["ratio_R1_bound"] for r in rows),
        "per_alpha": per_alpha,
    }
    return McReport(
        "linearization", rows, summary,
        _settings(dgp=dgp, basis=spec, n_values=list(n_values), reps=reps, grid_points=grid_points, seed=seed),
    )


# ---------------------------------------------------------------------------
# Gram and sandwich matrix estimation


def _matrix_rep(task):
    dgp, spec, n, Q, omega, stream = task
    basis = _basis(spec)
    data, _ = simulate(dgp, n, stream)
    f = fit(data, basis)
    return operator_norm(f.Q_hat - Q), operator_norm(f.Omega_hat - omega)


def matrix_study(
    dgp: DgpSpec,
    basis: BasisSpec,
    schedule=((1000, 5), (4000, 5), (16000, 5), (1000, 11), (4000, 11), (16000, 11)),
    reps: int = 200,
    seed: int = 0,
    workers: int = 1,
) -> McReport:
    """||Q_hat - Q|| and ||Omega_hat - Omega|| per cell, against sqrt(k log n / n) and sqrt(xi_k^2 log n / n)."""
    rows = []
    for i, (n, k) in enumerate(schedule):
        spec = _with_k(basis, k)
        b = _basis(spec)
        F = _truth_quadrature(spec, dgp.dim)
        P = b.eval(F.nodes)
        Q = (P * F.weights[:, None]).T @ P
        omega = omega_truth(dgp, b, F)
        res = run_reps(_matrix_rep, [(dgp, spec, n, Q, omega, _stream(seed, i, r)) for r in range(reps)], workers)
        ok, failed = successes(res, f"matrix cell ({n}, {k})")
        qd = np.array([a for a, _ in ok])
        od = np.array([c for _, c in ok])
        xi = diagnostics(b).xi_k
        rate_k = math.sqrt(spec.k * math.log(n) / n)
        rate_xi = math.sqrt(xi**2 * math.log(n) / n)
        rows.append(
            {
                "n": n,
                "k": spec.k,
                "basis": spec.family,
                "reps": len(ok),
                "failures": failed,
                "mean_Q_dev": float(qd.mean()),
                "mean_Omega_dev": float(od.mean()),
                "xi_k": xi,
                "rate_k": rate_k,
                "rate_xi": rate_xi,
                "ratio_Q_k": float(qd.mean() / rate_k),
                "ratio_Q_xi": float(qd.mean() / rate_xi),
                "ratio_Omega_xi": float(od.mean() / rate_xi),
            }
        )
    rq = [r["ratio_Q_k"] for r in rows]
    summary = {"ratio_Q_k_max_over_min": max(rq) / min(rq), "max_Omega_dev": max(r["mean_Omega_dev"] for r in rows)}
    return McReport("matrix", rows, summary, _settings(dgp=dgp, basis=basis, schedule=[list(c) for c in schedule], reps=reps, seed=seed))


# ---------------------------------------------------------------------------
# band coverage


def _functional_spec(kind: str, dim: int, grid_points: int, coord: int = 0) -> FunctionalSpec:
    if kind == "average_derivative":
        return FunctionalSpec("average_derivative", coord=coord, measure=gauss_legendre(dim))
    if kind in ("value", "partial_derivative"):
        return FunctionalSpec(kind, grid=uniform_grid(grid_points, dim), coord=coord)
    raise InvalidConfig(f"coverage studies support value, partial_derivative, average_derivative; got {kind!r}")


def _truth_theta(dgp: DgpSpec, fspec: FunctionalSpec) -> np.ndarray:
    g = dgp.g
    if fspec.kind == "value":
        return g(fspec.grid)
    if fspec.kind == "partial_derivative":
        return g.deriv(fspec.grid, fspec.coord)
    return np.array([fspec.measure.weights @ g.deriv(fspec.measure.nodes, fspec.coord)])


def _center_index(grid: np.ndarray) -> int:
    if grid.shape[1] == 0:
        return 0
    return int(np.argmin(np.linalg.norm(grid - 0.5, axis=1)))


def _coverage_rep(task):
    dgp, spec, n, loadings, theta, alphas, R, stream = task
    basis = _basis(spec)
    data, _ = simulate(dgp, n, stream.child(0))
    f = fit(data, basis)
    sig = sigma_theta_hat(f, loadings)
    th = loadings.loadings @ f.beta_hat
    S = multiplier_sup_stats(f, loadings, R, stream.child(1))
    dev = np.abs(th - theta) / sig
    out = []
    for a in alphas:
        c = upper_order_statistic(S, 1.0 - a)
        z = normal_quantile(1.0 - a / 2.0)
        out.append((bool(np.all(dev <= c)), dev <= z, c, float(np.mean(2 * c * sig))))
    return out


def coverage_study(
    dgp: DgpSpec,
    basis: BasisSpec,
    n: int = 500,
    k: int | None = 12,
    alphas=(0.05,),
    reps: int = 500,
    R: int = 2000,
    functional: str = "value",
    grid_points: int = 401,
    target: str = "truth",
    seed: int = 0,
    workers: int = 1,
) -> McReport:
    """Empirical uniform (all w) and pointwise coverage of multiplier bands for theta or its surrogate."""
    _require_reps(reps, 500, "coverage_study")
    spec = _with_k(basis, k)
    b = _basis(spec)
    fspec = _functional_spec(functional, dgp.dim, grid_points)
    loadings = build_loadings(fspec, b)
    theta = _target_theta(dgp, spec, fspec, loadings, target)
    alphas = tuple(float(a) for a in np.atleast_1d(alphas))
    res = run_reps(
        _coverage_rep, [(dgp, spec, n, loadings, theta, alphas, R, _stream(seed, 0, r)) for r in range(reps)], workers
    )
    ok, failed = successes(res, "coverage")
    rows = _coverage_rows(ok, alphas, fspec.grid, {"n": n, "k": spec.k, "basis": spec.family, "failures": failed})
    return McReport(
        "coverage", rows, {"uniform_coverage": {r["alpha"]: r["uniform_coverage"] for r in rows}},
        _settings(dgp=dgp, basis=spec, n=n, alphas=list(alphas), reps=reps, R=R, functional=functional,
                  grid_points=grid_points, target=target, seed=seed),
    )


def _target_theta(dgp, spec, fspec, loadings, target):
    if target == "truth":
        return _truth_theta(dgp, fspec)
    if target == "surrogate":
        beta = projection_coefficients(_basis(spec), dgp.g, _truth_quadrature(spec, dgp.dim))
        return loadings.loadings @ beta
    raise InvalidConfig(f"target must be 'truth' or 'surrogate', got {target!r}")


def _coverage_rows(ok, alphas, grid, extra):
    reps = len(ok)
    ci = _center_index(grid)
    rows = []
    for j, a in enumerate(alphas):
        uni = np.mean([rep[j][0] for rep in ok])
        pw = np.mean([rep[j][1] for rep in ok], axis=0)
        rows.append(
            {
                **extra,
                "alpha": a,
                "nominal": 1.0 - a,
                "reps": reps,
                "uniform_coverage": float(uni),
                "uniform_se": binomial_se(float(uni), reps),
                "pointwise_center": float(pw[ci]),
                "pointwise_center_se": binomial_se(float(pw[ci]), reps),
                "pointwise_mean": float(pw.mean()),
                "pointwise_min": float(pw.min()),
                "mean_critical_value": float(np.mean([rep[j][2] for rep in ok])),
                "mean_width": float(np.mean([rep[j][3] for rep in ok])),
            }
        )
    return rows


# ---------------------------------------------------------------------------
# misspecification


def _misspec_rep(task):
    dgp, spec, n, loadings, theta, beta_s, F, alpha, R, stream = task
    basis = _basis(spec)
    data, _ = simulate(dgp, n, stream.child(0))
    f = fit(data, basis)
    P = basis.eval(F.nodes)
    ghat = P @ f.beta_hat
    l2_s = math.sqrt(F.weights @ (ghat - P @ beta_s) ** 2)
    l2_g = math.sqrt(F.weights @ (ghat - dgp.g(F.nodes)) ** 2)
    covered = None
    if loadings is not None:
        sig = sigma_theta_hat(f, loadings)
        S = multiplier_sup_stats(f, loadings, R, stream.child(1))
        c = upper_order_statistic(S, 1.0 - alpha)
        covered = bool(np.all(np.abs(loadings.loadings @ f.beta_hat - theta) <= c * sig))
    return l2_s, l2_g, covered


def misspecification_study(
    dgp: DgpSpec,
    basis: BasisSpec,
    n_values=(500, 2000, 8000),
    alpha: float = 0.05,
    reps: int = 500,
    R: int = 2000,
    grid_points: int = 21,
    seed: int = 0,
    workers: int = 1,
) -> McReport:
    """Additive dictionary against a non-additive truth: surrogate vs truth L2 errors and surrogate band coverage."""
    b = _basis(basis)
    F = gauss_legendre(dgp.dim)
    beta_s = projection_coefficients(b, dgp.g, F)
    c_k = math.sqrt(F.weights @ (dgp.g(F.nodes) - b.eval(F.nodes) @ beta_s) ** 2)
    loadings = None
    theta = None
    if reps > 0 and R > 0:
        loadings = build_loadings(FunctionalSpec("value", grid=uniform_grid(grid_points, dgp.dim)), b)
        theta = loadings.loadings @ beta_s
    rows = []
    for i, n in enumerate(n_values):
        res = run_reps(
            _misspec_rep,
            [(dgp, basis, n, loadings, theta, beta_s, F, alpha, R, _stream(seed, i, r)) for r in range(reps)],
            workers,
        )
        ok, failed = successes(res, f"misspecification n={n}")
        cov = float(np.mean([c for _, _, c in ok]))
        rows.append(
            {
                "n": n,
                "k": b.k,
                "reps": len(ok),
                "failures": failed,
                "mean_l2_surrogate": float(np.mean([a for a, _, _ in ok])),
                "mean_l2_truth": float(np.mean([g for _, g, _ in ok])),
                "c_k_hat": c_k,
                "alpha": alpha,
                "uniform_coverage_surrogate": cov,
                "uniform_se": binomial_se(cov, len(ok)),
            }
        )
    s = [r["mean_l2_surrogate"] for r in rows]
    t = [r["mean_l2_truth"] for r in rows]
    summary = {
        "c_k_hat": c_k,
        "surrogate_l2_ratios": [s[i] / s[i + 1] for i in range(len(s) - 1)],
        "truth_l2_over_c_k": [x / c_k for x in t],
    }
    return McReport(
        "misspecification", rows, summary,
        _settings(dgp=dgp, basis=basis, n_values=list(n_values), alpha=alpha, reps=reps, R=R, grid_points=grid_points, seed=seed),
    )


# ---------------------------------------------------------------------------
# multiplier vs weighted bootstrap


def _agreement_rep(task):
    dgp, spec, n, loadings, theta_s, alpha, R, B, stream = task
    basis = _basis(spec)
    data, _ = simulate(dgp, n, stream.child(0))
    f = fit(data, basis)
    c_m = upper_order_statistic(multiplier_sup_stats(f, loadings, R, stream.child(1)), 1.0 - alpha)
    c_b = upper_order_statistic(
        bootstrap_sup_stats(data, basis, loadings, B, stream.child(2), base_fit=f), 1.0 - alpha
    )
    sig = sigma_theta_hat(f, loadings)
    sup_t = float(np.max(np.abs(loadings.loadings @ f.beta_hat - theta_s) / sig))
    return c_m, c_b, sup_t <= c_m, sup_t <= c_b


def unit_weight_bootstrap_value(dgp: DgpSpec, basis: BasisSpec, n: int, B: int = 100, seed: int = 0,
                                grid_points: int = 41, alpha: float = 0.05) -> float:
    """Bootstrap critical value with every weight fixed at 1: zero up to roundoff (degenerate)."""
    b = _basis(basis)
    data, _ = simulate(dgp, n, RandomStream(seed, 0))
    loadings = build_loadings(_functional_spec("value", dgp.dim, grid_points), b)
    S = bootstrap_sup_stats(data, b, loadings, B, RandomStream(seed, 1), weights=np.ones((B, n)))
    return upper_order_statistic(S, 1.0 - alpha)


def bootstrap_agreement_study(
    dgp: DgpSpec,
    basis: BasisSpec,
    n: int = 2000,
    k: int | None = 8,
    alpha: float = 0.05,
    reps: int = 100,
    R: int = 2000,
    B: int = 2000,
    grid_points: int = 41,
    seed: int = 0,
    workers: int = 1,
) -> McReport:
    """Paired multiplier and weighted-bootstrap critical values on identical data."""
    _require_reps(reps, 100, "bootstrap_agreement_study")
    spec = _with_k(basis, k)
    b = _basis(spec)
    fspec = _functional_spec("value", dgp.dim, grid_points)
    loadings = build_loadings(fspec, b)
    theta_s = _target_theta(dgp, spec, fspec, loadings, "surrogate")
    res = run_reps(
        _agreement_rep,
        [(dgp, spec, n, loadings, theta_s, alpha, R, B, _stream(seed, 0, r)) for r in range(reps)],
        workers,
    )
    ok, failed = successes(res, "bootstrap agreement")
    cm = np.array([a for a, _, _, _ in ok])
    cb = np.array([c for _, c, _, _ in ok])
    agree = np.mean([dm == db for _, _, dm, db in ok])
    unit_c = unit_weight_bootstrap_value(dgp, spec, n, seed=seed, grid_points=grid_points, alpha=alpha)
    row = {
        "n": n,
        "k": spec.k,
        "basis": spec.family,
        "alpha": alpha,
        "reps": len(ok),
        "failures": failed,
        "mean_c_multiplier": float(cm.mean()),
        "mean_c_bootstrap": float(cb.mean()),
        "mean_abs_diff": float(np.mean(np.abs(cm - cb))),
        "max_abs_diff": float(np.max(np.abs(cm - cb))),
        "decision_agreement": float(agree),
        "unit_weight_c": unit_c,
        "unit_weight_degenerate": bool(unit_c < 1e-8),
    }
    summary = {k_: row[k_] for k_ in ("mean_abs_diff", "decision_agreement", "unit_weight_degenerate")}
    return McReport(
        "bootstrap_agreement", [row], summary,
        _settings(dgp=dgp, basis=spec, n=n, alpha=alpha, reps=reps, R=R, B=B, grid_points=grid_points, seed=seed),
    )


# ---------------------------------------------------------------------------
# registry

STUDIES = {
    "rate": rate_study,
    "normality": normality_study,
    "linearization": linearization_study,
    "matrix": matrix_study,
    "coverage": coverage_study,
    "misspecification": misspecification_study,
    "bootstrap_agreement": bootstrap_agreement_study,
}

# per-study defaults for the data-generating process and dictionary
DEFAULT_SETUPS = {
    "rate": ({"truth": "quadratic"}, {"family": "legendre", "k": 5}),
    "normality": ({"truth": "sine"}, {"family": "legendre", "k": 8}),
    "linearization": ({"truth": "quadratic"}, {"family": "legendre", "k": 5}),
    "matrix": ({"truth": "linear"}, {"family": "fourier", "k": 5}),
    "coverage": ({"truth": "sine", "noise": "student_t", "df": 8.0}, {"family": "bspline", "k": 12, "order": 3}),
    "misspecification": (
        {"truth": "interaction"},
        {"family": "additive", "dims": [{"family": "legendre", "k": 4}, {"family": "legendre", "k": 4}]},
    ),
    "bootstrap_agreement": ({"truth": "sine"}, {"family": "legendre", "k": 8}),
}


def study_setup(name: str, dgp: dict | None = None, basis: dict | None = None) -> tuple[DgpSpec, BasisSpec]:
    """DgpSpec and BasisSpec for ``name``, overriding the study defaults with the given keys."""
    if name not in STUDIES:
        raise UnknownStudy(f"unknown study {name!r}; available: {', '.join(sorted(STUDIES))}")
    d0, b0 = DEFAULT_SETUPS[name]
    dgp_kw = {**d0, **(dgp or {})}
    basis_kw = dict(basis) if basis else dict(b0)
    try:
        return DgpSpec(**dgp_kw), BasisSpec.from_dict(basis_kw)
    except TypeError as exc:
        raise InvalidConfig(f"bad study setup: {exc}") from None


def run_study(name: str, params: dict | None = None, seed: int = 0, workers: int = 1,
              dgp: dict | None = None, basis: dict | None = None) -> McReport:
    """Run a registered study; ``params`` are keyword arguments of the study function."""
    d, b = study_setup(name, dgp, basis)
    fn = STUDIES[name]
    params = dict(params or {})
    allowed = set(inspect.signature(fn).parameters) - {"dgp", "basis", "seed", "workers"}
    extra = set(params) - allowed
    if extra:
        raise InvalidConfig(f"study {name!r} does not accept {sorted(extra)}; allowed: {sorted(allowed)}")
    for key in ("schedule",):
        if key in params:
            params[key] = tuple(tuple(c) for c in params[key])
    return fn(d, b, seed=int(seed), workers=int(workers), **params)
