from __future__ import annotations

import json
import math

import numpy as np
import pytest

from lsseries.bases import BasisSpec, make_basis
from lsseries.errors import InsufficientReps, InvalidConfig, SingularDesign, TooManyFailures, UnknownStudy
from lsseries.experiments import DgpSpec, McReport, binomial_se, omega_truth, run_reps, run_study, simulate
from lsseries.experiments.harness import successes
from lsseries.numutil import RandomStream, gauss_legendre


def test_dgp_library():
    X = np.array([[0.25, 0.5], [1.0, 0.2]])
    assert np.allclose(DgpSpec("linear").g(X[:, :1]), [1.5, 3.0])
    assert np.allclose(DgpSpec("quadratic").g(X[:, :1]), [1.125, 0.0])
    assert np.allclose(DgpSpec("interaction").g(X), [0.125, 0.2])
    assert np.allclose(DgpSpec("interaction").g.deriv(X, 0), [0.5, 0.2])
    assert DgpSpec("interaction").dim == 2
    het = DgpSpec("sine", "heteroskedastic", sigma=2.0)
    assert np.allclose(het.sigma_of(X), [1.5, 3.0])
    with pytest.raises(InvalidConfig):
        DgpSpec("sine", "student_t", df=4.0)
    with pytest.raises(InvalidConfig):
        DgpSpec("cosine")
    with pytest.raises(InvalidConfig):
        DgpSpec("interaction", dim=1)


def test_student_t_noise_has_unit_variance():
    data, eps = simulate(DgpSpec("sine", "student_t", df=8.0), 200_000, RandomStream(3))
    assert abs(eps.var() - 1.0) < 0.02
    assert np.allclose(data.y - eps, np.sin(2 * np.pi * data.x[:, 0]))


def test_simulate_is_deterministic():
    a, _ = simulate(DgpSpec(), 50, RandomStream(1, 2))
    b, _ = simulate(DgpSpec(), 50, RandomStream(1, 2))
    assert np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y)


def test_omega_truth_homoskedastic_in_span_is_identity():
    b = make_basis(BasisSpec("legendre", 5))
    Om = omega_truth(DgpSpec("linear"), b, gauss_legendre(1))
    assert np.allclose(Om, np.eye(5), atol=1e-12)
    het = omega_truth(DgpSpec("linear", "heteroskedastic"), b, gauss_legendre(1))
    # E[(0.5 + x)^2] = 13/12 under U(0, 1)
    assert het[0, 0] == pytest.approx(13 / 12, rel=1e-12)


def test_noiseless_rate_cells_are_exact():
    r = run_study("rate", {"reps": 5, "schedule": [[50, 3], [200, 3]]}, seed=0, dgp={"truth": "quadratic", "sigma": 0.0})
    assert np.all(r.column("mean_l2") <= 1e-8) and np.all(r.column("mean_sup") <= 1e-8)


def test_rate_fixed_k_doubling():
    r = run_study("rate", {"reps": 200, "schedule": [[1000, 5], [2000, 5]]}, seed=4)
    ratio = r.rows[1]["mean_l2"] / r.rows[0]["mean_l2"]
    assert abs(ratio - 1 / math.sqrt(2)) <= 0.15 / math.sqrt(2)


def test_rate_slope_spline_cube_root_k():
    # k(n) ~ n^(1/3): error ~ sqrt(k/n) ~ n^(-1/3)
    sched = [[n, max(5, round(1.2 * n ** (1 / 3)))] for n in (500, 2000, 8000)]
    r = run_study("rate", {"reps": 100, "schedule": sched}, seed=2,
                  dgp={"truth": "sine"}, basis={"family": "bspline", "k": 5, "order": 3})
    assert abs(r.summary["l2_slope"] - (-1 / 3)) <= 0.1


def test_rate_requires_n_at_least_2k():
    with pytest.raises(InvalidConfig):
        run_study("rate", {"reps": 5, "schedule": [[10, 6]]}, seed=0)


def test_guards():
    with pytest.raises(InsufficientReps):
        run_study("normality", {"reps": 10}, seed=0)
    with pytest.raises(InsufficientReps):
        run_study("coverage", {"reps": 100}, seed=0)
    with pytest.raises(InsufficientReps):
        run_study("linearization", {"reps": 50}, seed=0)
    with pytest.raises(InsufficientReps):
        run_study("bootstrap_agreement", {"reps": 10}, seed=0)
    with pytest.raises(UnknownStudy) as exc:
        run_study("power", {}, seed=0)
    assert "coverage" in str(exc.value)
    with pytest.raises(InvalidConfig):
        run_study("rate", {"replications": 3}, seed=0)


def _flaky(task):
    i, fail = task
    if fail:
        raise SingularDesign("synthetic")
    return i


def test_failure_accounting():
    ok, failed = successes(run_reps(_flaky, [(i, False) for i in range(9)]), "x")
    assert failed == 0 and ok == list(range(9))
    # one failure in 100 is tolerated and excluded; two abort the study
    ok, failed = successes(run_reps(_flaky, [(i, i == 50) for i in range(100)]), "x")
    assert failed == 1 and len(ok) == 99 and 50 not in ok
    with pytest.raises(TooManyFailures):
        successes(run_reps(_flaky, [(i, i in (3, 4)) for i in range(100)]), "x")


def test_worker_invariance():
    params = {"reps": 12, "schedule": [[100, 4], [200, 4]]}
    a = run_study("rate", params, seed=9, workers=1)
    b = run_study("rate", params, seed=9, workers=3)
    assert a.to_dict() == b.to_dict()


def test_report_outputs(tmp_path):
    r = McReport("demo", [{"n": 1, "cov": 0.5, "flag": True}, {"n": 2, "cov": float("inf"), "flag": False}],
                 {"s": np.float64(1.5)}, {"seed": 3})
    r.to_csv(tmp_path / "r.csv")
    r.to_json(tmp_path / "r.json")
    assert (tmp_path / "r.csv").read_text() == "n,cov,flag\n1,0.5,true\n2,inf,false\n"
    d = json.loads((tmp_path / "r.json").read_text())
    assert d["summary"]["s"] == 1.5 and d["settings"]["seed"] == 3
    assert binomial_se(0.95, 500) == pytest.approx(math.sqrt(0.95 * 0.05 / 500))


def test_normality_oracle_difference():
    r = run_study("normality", {"reps": 1000, "x_points": [0.3, 0.5]}, seed=6)
    assert r.summary["max_ks_diff"] <= 0.02
    assert r.summary["max_ks_feasible"] <= 0.05


def test_matrix_large_n_gram():
    r = run_study("matrix", {"reps": 20, "schedule": [[100_000, 5]]}, seed=1, basis={"family": "legendre", "k": 5})
    assert r.rows[0]["mean_Q_dev"] <= 0.05


def test_linearization_bound_ratio_bounded():
    r = run_study("linearization", {"reps": 200, "n_values": [500, 2000]}, seed=3)
    assert r.summary["max_R2"] <= 1e-8
    assert r.summary["ratio_R1_bound_max"] < 5.0
    assert 1.6 <= r.summary["median_R1_shrink"][0] <= 2.6


def test_coverage_report_has_binomial_se():
    r = run_study("coverage", {"reps": 500, "R": 500, "grid_points": 101}, seed=2)
    row = r.rows[0]
    assert 0 <= row["uniform_coverage"] <= 1
    assert row["uniform_se"] == pytest.approx(binomial_se(row["uniform_coverage"], 500))
    assert 0.92 <= row["pointwise_center"] <= 0.975


def test_misspecification_c_k():
    r = run_study("misspecification", {"reps": 20, "R": 200, "n_values": [500]}, seed=0)
    # x1 x2 minus its additive projection is (x1 - 1/2)(x2 - 1/2), of L2 norm 1/12
    assert r.summary["c_k_hat"] == pytest.approx(1 / 12, abs=1e-10)
    assert r.summary["c_k_hat"] > 0.02


def test_bootstrap_agreement_small():
    r = run_study("bootstrap_agreement", {"reps": 100, "R": 500, "B": 500, "n": 500}, seed=5)
    assert r.rows[0]["unit_weight_degenerate"] is True
    assert r.rows[0]["decision_agreement"] >= 0.9
