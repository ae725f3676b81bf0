"""Approximation diagnostics: projections, L2/sup errors, Lebesgue factors and constants.

All norms are taken with respect to a quadrature ``F`` (L2) or a uniform
evaluation grid (sup); the grid sup is a lower bound of the true supremum.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .bases import Basis
from .errors import InvalidSpec
from .functionals import projection_coefficients
from .numutil import Quadrature, RandomStream, uniform_grid

ZERO_ERROR_TOL = 1e-12
DEFAULT_SUP_GRID = 2001


@dataclass(frozen=True)
class ApproxReport:
    family: str
    k: int
    c_k_hat: float
    sup_err: float
    lebesgue_factor: float
    beta_g: np.ndarray

    def row(self) -> dict:
        return {
            "family": self.family,
            "k": self.k,
            "c_k_hat": self.c_k_hat,
            "sup_err": self.sup_err,
            "lebesgue_factor": self.lebesgue_factor,
        }


def _family(basis: Basis) -> str:
    return basis.spec.family if basis.spec is not None else type(basis).__name__


def project(g: Callable, basis: Basis, F: Quadrature) -> tuple[np.ndarray, Callable]:
    """beta_g minimizing int (g - p'b)^2 dF, and the residual function r_g(x) = g(x) - p(x)'beta_g."""
    beta = projection_coefficients(basis, g, F)

    def r_g(x):
        X = np.asarray(x, dtype=float)
        if X.ndim == 1 and basis.dim == 1:
            X = X[:, None]
        return np.asarray(g(X), dtype=float) - basis.eval(X) @ beta

    return beta, r_g


def approx_report(g: Callable, basis: Basis, F: Quadrature, sup_grid: int = DEFAULT_SUP_GRID) -> ApproxReport:
    if sup_grid < 256:
        raise InvalidSpec("sup_grid needs at least 256 points per dimension")
    beta, r_g = project(g, basis, F)
    c_k = float(np.sqrt(max(F.weights @ r_g(F.nodes) ** 2, 0.0)))
    sup_err = float(np.max(np.abs(r_g(uniform_grid(sup_grid, basis.dim)))))
    factor = 1.0 if c_k < ZERO_ERROR_TOL else sup_err / c_k
    return ApproxReport(_family(basis), basis.k, c_k, sup_err, factor, beta)


def approx_table(g: Callable, bases: Sequence[Basis], F: Quadrature, sup_grid: int = DEFAULT_SUP_GRID) -> list[ApproxReport]:
    """Error table of one target across several dictionaries (spline vs polynomial comparisons)."""
    return [approx_report(g, b, F, sup_grid) for b in bases]


def lebesgue_probe(
    basis: Basis, F: Quadrature, trial_functions: Sequence[Callable], sup_grid: int = DEFAULT_SUP_GRID
) -> float:
    """max over trials f of ||p'beta_f||_inf / ||f||_inf, a lower bound on the Lebesgue constant."""
    X = uniform_grid(sup_grid, basis.dim)
    P = basis.eval(X)
    best = 0.0
    for f in trial_functions:
        fx = np.asarray(f(X), dtype=float)
        denom = float(np.max(np.abs(fx)))
        if denom == 0.0:
            raise InvalidSpec("trial function vanishes on the grid")
        beta = projection_coefficients(basis, f, F)
        best = max(best, float(np.max(np.abs(P @ beta))) / denom)
    return best


def basis_function_trials(basis: Basis) -> list[Callable]:
    return [lambda X, j=j: basis.eval(X)[:, j] for j in range(basis.k)]


def polynomial_mixture_trials(stream: RandomStream, count: int, degree: int = 6) -> list[Callable]:
    """Random polynomials sum_j a_j (2x-1)^j with a_j ~ N(0, 1/(j+1)^2), in the first coordinate."""
    A = stream.generator().standard_normal((count, degree + 1)) / (np.arange(degree + 1) + 1.0)
    return [lambda X, a=a: np.polynomial.polynomial.polyval(2.0 * X[:, 0] - 1.0, a) for a in A]


def smooth_bump_trials(stream: RandomStream, count: int) -> list[Callable]:
    """Smoothed steps tanh((x - c)/s) with random centers and widths, in the first coordinate."""
    rng = stream.generator()
    centers = rng.uniform(0.1, 0.9, count)
    widths = rng.uniform(0.02, 0.2, count)
    return [lambda X, c=c, s=s: np.tanh((X[:, 0] - c) / s) for c, s in zip(centers, widths)]


def kernel_sign_trials(basis: Basis, F: Quadrature, anchors, sharpness: float = 50.0) -> list[Callable]:
    """Smoothed sign(K(x0, .)) for the projection kernel K(x0, y) = p(x0)' G^{-1} p(y).

    Near-extremal for the Lebesgue function at each anchor x0.
    """
    P = basis.eval(F.nodes)
    G = (P * F.weights[:, None]).T @ P
    trials = []
    for x0 in np.atleast_1d(np.asarray(anchors, dtype=float)):
        v = np.linalg.solve(G, basis.eval(np.atleast_1d(x0) if basis.dim > 1 else x0))
        scale = float(np.max(np.abs(P @ v)))
        trials.append(lambda X, v=v, s=scale: np.tanh(sharpness * (basis.eval(X) @ v) / s))
    return trials


# Twelve-level synthetic conditional-mean profile (flat, then convex increase), knots equally spaced on [0, 1].
_WAGE_LEVELS = np.array([2.20, 2.24, 2.27, 2.33, 2.42, 2.47, 2.60, 2.74, 2.83, 3.00, 3.12, 3.18])
_WAGE_KNOTS = np.linspace(0.0, 1.0, _WAGE_LEVELS.size)


def wage_analog(X) -> np.ndarray:
    """Piecewise-linear 12-point profile standing in for a conditional mean over schooling levels."""
    X = np.asarray(X, dtype=float)
    x = X[:, 0] if X.ndim == 2 else X
    return np.interp(x, _WAGE_KNOTS, _WAGE_LEVELS)
