"""Least-squares series fit, sandwich matrices, and the exponential-weight refit."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve

from .bases import Basis
from .errors import DataError, DimensionMismatch, NonPositiveWeight, NotPositiveDefinite, OutOfDomain, SingularDesign
from .numutil import cholesky, operator_norm, psd_factor

SINGULAR_REL_TOL = 1e-10


@dataclass(frozen=True)
class Dataset:
    """n observations: covariates ``x`` of shape (n, d) in [0,1]^d and responses ``y`` of shape (n,)."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self) -> None:
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        y = np.asarray(self.y, dtype=float).ravel()
        if x.ndim != 2 or x.shape[0] != y.shape[0]:
            raise DimensionMismatch(f"x has {x.shape[0]} rows but y has {y.shape[0]} entries")
        if y.shape[0] < 1:
            raise DataError("dataset is empty")
        if not np.all(np.isfinite(y)):
            raise DataError("responses must be finite")
        if not np.all(np.isfinite(x)) or np.any(x < -1e-12) or np.any(x > 1 + 1e-12):
            raise OutOfDomain("covariates must lie in [0, 1]^d")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True)
class FitResult:
    basis: Basis
    beta_hat: np.ndarray
    residuals: np.ndarray
    Q_hat: np.ndarray
    Sigma_hat: np.ndarray
    Omega_hat: np.ndarray
    omega_factor: np.ndarray
    n: int
    design: np.ndarray
    gram_factor: np.ndarray

    @property
    def k(self) -> int:
        return self.beta_hat.shape[0]

    def predict(self, x) -> np.ndarray:
        return self.basis.eval(x) @ self.beta_hat


def _gram_cholesky(Q: np.ndarray) -> np.ndarray:
    try:
        return cholesky(Q, SINGULAR_REL_TOL)
    except NotPositiveDefinite as exc:
        raise SingularDesign(
            f"empirical Gram matrix E_n[p p'] is singular (smallest pivot {exc.pivot:.3e}): "
            "regressors are collinear in sample or n is too small; eigenvalues of E[p p'] "
            "must be bounded away from zero",
            pivot=exc.pivot,
        ) from None


def _fit_design(P: np.ndarray, y: np.ndarray, h: np.ndarray, basis: Basis) -> FitResult:
    n, k = P.shape
    if n < k:
        raise SingularDesign(f"n={n} < k={k}: at least k observations are required (k/n must be small)")
    hP = P * h[:, None]
    Q = (hP.T @ P) / n
    Q = 0.5 * (Q + Q.T)
    L = _gram_cholesky(Q)
    rhs = (hP.T @ y) / n
    beta = cho_solve((L, True), rhs)
    resid = y - P @ beta
    hr2P = hP * (resid**2)[:, None]
    Sigma = (hr2P.T @ P) / n
    Sigma = 0.5 * (Sigma + Sigma.T)
    X = cho_solve((L, True), Sigma)
    Omega = cho_solve((L, True), X.T)
    Omega = 0.5 * (Omega + Omega.T)
    factor = psd_factor(Omega) if np.any(Omega) else np.zeros_like(Omega)
    return FitResult(
        basis=basis,
        beta_hat=beta,
        residuals=resid,
        Q_hat=Q,
        Sigma_hat=Sigma,
        Omega_hat=Omega,
        omega_factor=factor,
        n=n,
        design=P,
        gram_factor=L,
    )


def fit(data: Dataset, basis: Basis) -> FitResult:
    """Ordinary least squares of y on p(x): the minimizer of E_n[(y - p'b)^2]."""
    return weighted_fit(data, basis, np.ones(data.n))


def weighted_fit(data: Dataset, basis: Basis, h) -> FitResult:
    """Minimizer of E_n[h_i (y_i - p_i'b)^2]; matrices use the h-weighted empirical measure."""
    h = np.asarray(h, dtype=float).ravel()
    if h.shape[0] != data.n:
        raise DimensionMismatch(f"{h.shape[0]} weights for {data.n} observations")
    if not np.all(h > 0) or not np.all(np.isfinite(h)):
        raise NonPositiveWeight("bootstrap weights must be finite and strictly positive")
    P = basis.eval(data.x)
    return _fit_design(P, data.y, h, basis)


def predict(fit_result: FitResult, x) -> np.ndarray:
    return fit_result.predict(x)


def gram_deviation(data: Dataset, basis: Basis, weights=None) -> float:
    """Operator norm of E_n[h p p'] - I (h = 1 unless ``weights`` given).

    Meaningful only when the basis is orthonormal under the sampling distribution.
    """
    P = basis.eval(data.x)
    h = np.ones(data.n) if weights is None else np.asarray(weights, dtype=float)
    Q = ((P * h[:, None]).T @ P) / data.n
    return operator_norm(0.5 * (Q + Q.T) - np.eye(basis.k))
