"""Pointwise intervals, simulated critical values, and uniform confidence bands.

The multiplier critical value is the (1 - alpha) order statistic of

    S_r = max_w |l(w)' L z_r| / sqrt(l(w)' Omega_hat l(w)),   z_r ~ N(0, I_k),

with L L' = Omega_hat. The weighted bootstrap replaces l(w)' L z_r / sqrt(n) by
l(w)'(beta_b - beta_hat) for the h-weighted refit with h_i ~ Exp(1).
One-sided bands drop the absolute value and report an infinite upper edge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .bases import Basis
from .errors import BootstrapFailure, DegenerateVariance, InsufficientDraws, InvalidConfig, SingularDesign
from .functionals import DEGENERATE_SIGMA_TOL, LoadingSet, sigma_theta_hat, theta_hat
from .numutil import RandomStream, exponential_weights, standard_normal_matrix
from .regression import SINGULAR_REL_TOL, Dataset, FitResult, fit as ls_fit, weighted_fit

SIDES = ("two_sided", "one_sided_lower")
METHODS = ("gaussian_multiplier", "weighted_bootstrap")
MIN_DRAWS = 100
DEFAULT_R = 5000
DEFAULT_B = 1000
_CHUNK = 1000


@dataclass(frozen=True)
class BandResult:
    grid: np.ndarray
    theta_hat: np.ndarray
    sigma_hat: np.ndarray
    critical_value: float
    lower: np.ndarray
    upper: np.ndarray
    alpha: float
    method: str
    draws: int
    side: str

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def covers(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        return (self.lower <= theta) & (theta <= self.upper)


@dataclass(frozen=True)
class TStatProcess:
    grid: np.ndarray
    values: np.ndarray

    @property
    def sup_abs(self) -> float:
        return float(np.max(np.abs(self.values)))


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise InvalidConfig(f"alpha must lie in (0, 1), got {alpha}")
    return alpha


def _check_side(side: str) -> None:
    if side not in SIDES:
        raise InvalidConfig(f"side must be one of {SIDES}, got {side!r}")


def normal_quantile(p: float) -> float:
    """Standard normal quantile (Cephes ndtri rational approximations, ~1e-15 accuracy)."""
    return float(ndtri(p))


def upper_order_statistic(stats, level: float) -> float:
    """Order statistic of rank ceil(level * R) of ``stats`` (the conservative "higher" rule)."""
    s = np.sort(np.asarray(stats, dtype=float))
    R = s.shape[0]
    # round() strips representation noise such as 0.95 * 2000 = 1900.0000000000002
    rank = math.ceil(round(level * R, 9))
    rank = min(max(rank, 1), R)
    return float(s[rank - 1])


def pointwise_ci(fit: FitResult, loadings: LoadingSet, alpha: float = 0.05) -> BandResult:
    """theta_hat(w) +/- z_{1 - alpha/2} sigma_hat(w) at each index point separately."""
    alpha = _check_alpha(alpha)
    th = theta_hat(fit, loadings)
    sig = sigma_theta_hat(fit, loadings)
    z = normal_quantile(1.0 - alpha / 2.0)
    return BandResult(loadings.grid, th, sig, z, th - z * sig, th + z * sig, alpha, "pointwise_normal", 0, "two_sided")


def multiplier_sup_stats(
    fit: FitResult, loadings: LoadingSet, R: int, stream: RandomStream, side: str = "two_sided"
) -> np.ndarray:
    """Simulated suprema S_1..S_R of the t* process."""
    _check_side(side)
    if R < MIN_DRAWS:
        raise InsufficientDraws(f"R={R} multiplier draws; at least {MIN_DRAWS} are required")
    sigma = sigma_theta_hat(fit, loadings)
    scale = math.sqrt(fit.n) * sigma
    A = (loadings.loadings @ fit.omega_factor) / scale[:, None]
    Z = standard_normal_matrix(stream, R, fit.k)
    out = np.empty(R)
    for start in range(0, R, _CHUNK):
        T = Z[start : start + _CHUNK] @ A.T
        out[start : start + _CHUNK] = np.max(np.abs(T) if side == "two_sided" else T, axis=1)
    return out


def multiplier_critical_value(
    fit: FitResult,
    loadings: LoadingSet,
    alpha: float = 0.05,
    R: int = DEFAULT_R,
    stream: RandomStream | None = None,
    side: str = "two_sided",
) -> float:
    alpha = _check_alpha(alpha)
    if stream is None:
        raise InvalidConfig("a RandomStream is required for simulated critical values")
    return upper_order_statistic(multiplier_sup_stats(fit, loadings, R, stream, side), 1.0 - alpha)


def _batched_refits(P: np.ndarray, y: np.ndarray, H: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Weighted LS coefficients for each row of H; returns (betas, ok-mask)."""
    n, k = P.shape
    HP = H[:, :, None] * P[None, :, :]
    Q = np.matmul(HP.transpose(0, 2, 1), P) / n
    rhs = np.matmul(HP.transpose(0, 2, 1), y) / n
    betas = np.full((H.shape[0], k), np.nan)
    ok = np.zeros(H.shape[0], dtype=bool)
    thresh = SINGULAR_REL_TOL * np.trace(Q, axis1=1, axis2=2) / k
    try:
        L = np.linalg.cholesky(Q)
        ok = np.all(np.diagonal(L, axis1=1, axis2=2) ** 2 >= thresh[:, None], axis=1)
    except np.linalg.LinAlgError:
        return betas, ok
    idx = np.flatnonzero(ok)
    if idx.size:
        z = np.linalg.solve(L[idx], rhs[idx][:, :, None])
        betas[idx] = np.linalg.solve(L[idx].transpose(0, 2, 1), z)[:, :, 0]
    return betas, ok


def bootstrap_sup_stats(
    data: Dataset,
    basis: Basis,
    loadings: LoadingSet,
    B: int,
    stream: RandomStream,
    side: str = "two_sided",
    base_fit: FitResult | None = None,
    weights: np.ndarray | None = None,
) -> np.ndarray:
    """Suprema S_b = max_w |l(w)'(beta_b - beta_hat)| / sigma_hat(w) over B weighted refits.

    Refit b uses ``exponential_weights(stream.child(b), n)``; a singular refit is
    retried once with ``stream.child(b).child(1)``. ``weights`` (B x n) overrides
    the random draws.
    """
    _check_side(side)
    if B < MIN_DRAWS:
        raise InsufficientDraws(f"B={B} bootstrap draws; at least {MIN_DRAWS} are required")
    base = base_fit if base_fit is not None else ls_fit(data, basis)
    sigma = sigma_theta_hat(base, loadings, allow_degenerate=True)
    P, y, n = base.design, data.y, data.n
    Lw = loadings.loadings
    degenerate = sigma < DEGENERATE_SIGMA_TOL
    th_scale = 1.0 + np.abs(Lw @ base.beta_hat)
    out = np.empty(B)
    step = max(1, min(100, 20_000_000 // (n * P.shape[1])))
    for start in range(0, B, step):
        stop = min(start + step, B)
        if weights is not None:
            H = np.asarray(weights[start:stop], dtype=float)
        else:
            H = np.vstack([exponential_weights(stream.child(b), n) for b in range(start, stop)])
        betas, ok = _batched_refits(P, y, H)
        for j in np.flatnonzero(~ok):
            b = start + j
            try:
                betas[j] = weighted_fit(data, basis, H[j]).beta_hat
            except SingularDesign:
                try:
                    h = exponential_weights(stream.child(b).child(1), n)
                    betas[j] = weighted_fit(data, basis, h).beta_hat
                except SingularDesign as exc:
                    raise BootstrapFailure(f"bootstrap refit {b} singular after one retry: {exc}") from None
        D = (betas - base.beta_hat) @ Lw.T
        with np.errstate(divide="ignore", invalid="ignore"):
            T = D / sigma
        if np.any(degenerate):
            tiny = np.abs(D[:, degenerate]) <= 1e-10 * th_scale[degenerate]
            if not np.all(tiny):
                raise DegenerateVariance("sigma_hat vanishes at an index point where bootstrap draws vary")
            T[:, degenerate] = 0.0
        out[start:stop] = np.max(np.abs(T) if side == "two_sided" else T, axis=1)
    return out


def bootstrap_critical_value(
    data: Dataset,
    basis: Basis,
    loadings: LoadingSet,
    alpha: float = 0.05,
    B: int = DEFAULT_B,
    stream: RandomStream | None = None,
    side: str = "two_sided",
    base_fit: FitResult | None = None,
) -> float:
    alpha = _check_alpha(alpha)
    if stream is None:
        raise InvalidConfig("a RandomStream is required for bootstrap critical values")
    stats = bootstrap_sup_stats(data, basis, loadings, B, stream, side, base_fit)
    return upper_order_statistic(stats, 1.0 - alpha)


def uniform_band(
    fit: FitResult,
    loadings: LoadingSet,
    alpha: float = 0.05,
    R: int = DEFAULT_R,
    stream: RandomStream | None = None,
    side: str = "two_sided",
    method: str = "gaussian_multiplier",
    data: Dataset | None = None,
) -> BandResult:
    """[theta_hat - c sigma_hat, theta_hat + c sigma_hat] (upper edge +inf when one-sided)."""
    alpha = _check_alpha(alpha)
    _check_side(side)
    if method == "gaussian_multiplier":
        c = multiplier_critical_value(fit, loadings, alpha, R, stream, side)
    elif method == "weighted_bootstrap":
        if data is None:
            raise InvalidConfig("weighted_bootstrap bands need the dataset")
        c = bootstrap_critical_value(data, fit.basis, loadings, alpha, R, stream, side, base_fit=fit)
    else:
        raise InvalidConfig(f"method must be one of {METHODS}, got {method!r}")
    th = theta_hat(fit, loadings)
    sig = sigma_theta_hat(fit, loadings)
    lower = th - c * sig
    upper = th + c * sig if side == "two_sided" else np.full_like(th, np.inf)
    return BandResult(loadings.grid, th, sig, c, lower, upper, alpha, method, int(R), side)


def tstat_process(fit: FitResult, loadings: LoadingSet, theta_true) -> TStatProcess:
    """t(w) = (theta_hat(w) - theta(w)) / sigma_hat(w)."""
    theta_true = np.asarray(theta_true, dtype=float).ravel()
    if not np.all(np.isfinite(theta_true)):
        raise InvalidConfig("theta_true must be finite")
    th = theta_hat(fit, loadings)
    sig = sigma_theta_hat(fit, loadings)
    return TStatProcess(loadings.grid, (th - theta_true) / sig)
