"""Loadings of linear functionals theta(w) = l(w)'beta + r(w) and their plug-in estimates.

Supported kinds:

* ``value``                    l(w) = p(w)
* ``partial_derivative``       l(w) = d^m p(w) / dx_j^m
* ``average_derivative``       l = sum_q mu_q dp(node_q)/dx_j   (single row)
* ``cond_average_derivative``  l(x2) = sum_q mu_q(x2) dp(node_q, x2)/dx_j, one row per conditioning point

Measures are supplied explicitly as quadratures; they are never estimated.
Truth functions ``g`` take an (n, d) array and return an (n,) array.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .bases import Basis
from .errors import DegenerateVariance, DimensionMismatch, InvalidSpec, ZeroLoading
from .numutil import Quadrature, cholesky
from .regression import FitResult

KINDS = ("value", "partial_derivative", "average_derivative", "cond_average_derivative")
ZERO_LOADING_TOL = 1e-12
DEGENERATE_SIGMA_TOL = 1e-14


def _check_measure(q: Quadrature, name: str) -> None:
    w = q.weights
    if w.size == 0 or not np.all(np.isfinite(w)) or np.any(w < 0):
        raise InvalidSpec(f"{name}: weights must be finite and nonnegative")
    if abs(w.sum() - 1.0) > 1e-8:
        raise InvalidSpec(f"{name}: total mass must be 1, got {w.sum():.10g}")


@dataclass(frozen=True)
class FunctionalSpec:
    kind: str
    grid: np.ndarray | None = None
    coord: int = 0
    order: int = 1
    measure: Quadrature | None = None
    cond_measures: tuple[Quadrature, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise InvalidSpec(f"unknown functional kind {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "cond_measures", tuple(self.cond_measures))
        if self.kind == "average_derivative":
            if self.measure is None:
                raise InvalidSpec("average_derivative needs a measure")
            _check_measure(self.measure, "average_derivative measure")
            object.__setattr__(self, "grid", np.zeros((1, 0)))
            return
        if self.grid is None:
            raise InvalidSpec(f"{self.kind} needs an index grid")
        g = np.asarray(self.grid, dtype=float)
        if g.ndim == 1:
            g = g[:, None]
        if g.shape[0] == 0:
            raise InvalidSpec("index grid is empty")
        object.__setattr__(self, "grid", g)
        if self.kind == "cond_average_derivative":
            if len(self.cond_measures) != g.shape[0]:
                raise InvalidSpec(
                    f"{g.shape[0]} conditioning points but {len(self.cond_measures)} conditional measures"
                )
            for i, q in enumerate(self.cond_measures):
                if q.dim != 1:
                    raise InvalidSpec("conditional measures must be one-dimensional (over the integrated coordinate)")
                _check_measure(q, f"conditional measure {i}")
        if self.order not in (1, 2):
            raise InvalidSpec("derivative order must be 1 or 2")


@dataclass(frozen=True)
class LoadingSet:
    loadings: np.ndarray
    grid: np.ndarray
    norms: np.ndarray

    @property
    def k(self) -> int:
        return self.loadings.shape[1]

    @property
    def xi_theta(self) -> float:
        """max_w ||l(w)|| over the grid."""
        return float(self.norms.max())

    def scaled(self, s) -> "LoadingSet":
        s = np.asarray(s, dtype=float).reshape(-1, 1)
        L = self.loadings * s
        return LoadingSet(L, self.grid, np.linalg.norm(L, axis=1))


def _embed(x1: np.ndarray, fixed: np.ndarray, coord: int) -> np.ndarray:
    """Points with coordinate ``coord`` = x1 and the remaining coordinates = fixed."""
    n = x1.shape[0]
    rest = np.broadcast_to(fixed, (n, fixed.shape[0]))
    return np.insert(rest, coord, x1, axis=1)


def _raw_loadings(spec: FunctionalSpec, basis: Basis) -> np.ndarray:
    if spec.kind in ("value", "partial_derivative") and spec.grid.shape[1] != basis.dim:
        raise DimensionMismatch(f"grid points have dimension {spec.grid.shape[1]}, basis has {basis.dim}")
    if not 0 <= spec.coord < basis.dim:
        raise InvalidSpec(f"derivative coordinate {spec.coord} outside dimension {basis.dim}")
    if spec.kind == "value":
        return basis.eval(spec.grid)
    if spec.kind == "partial_derivative":
        return basis.eval_deriv(spec.grid, spec.coord, spec.order)
    if spec.kind == "average_derivative":
        if spec.measure.dim != basis.dim:
            raise DimensionMismatch("average_derivative measure dimension differs from basis dimension")
        D = basis.eval_deriv(spec.measure.nodes, spec.coord, 1)
        return (spec.measure.weights @ D)[None, :]
    if spec.grid.shape[1] != basis.dim - 1:
        raise DimensionMismatch(f"conditioning points need dimension {basis.dim - 1}")
    rows = []
    for x2, q in zip(spec.grid, spec.cond_measures):
        pts = _embed(q.nodes[:, 0], x2, spec.coord)
        rows.append(q.weights @ basis.eval_deriv(pts, spec.coord, 1))
    return np.vstack(rows)


def build_loadings(spec: FunctionalSpec, basis: Basis) -> LoadingSet:
    L = _raw_loadings(spec, basis)
    norms = np.linalg.norm(L, axis=1)
    if not np.all(np.isfinite(L)):
        raise ZeroLoading("non-finite loading row")
    if np.any(norms < ZERO_LOADING_TOL):
        i = int(np.argmin(norms))
        raise ZeroLoading(
            f"loading at index point {spec.grid[i].tolist()} has norm {norms[i]:.3e}; "
            "1/||l(w)|| must stay bounded for inference"
        )
    return LoadingSet(L, spec.grid.copy(), norms)


def theta_hat(fit: FitResult, loadings: LoadingSet) -> np.ndarray:
    if loadings.k != fit.k:
        raise DimensionMismatch(f"loadings have k={loadings.k}, fit has k={fit.k}")
    return loadings.loadings @ fit.beta_hat


def sigma_theta_hat(fit: FitResult, loadings: LoadingSet, allow_degenerate: bool = False) -> np.ndarray:
    """sqrt(l(w)' Omega_hat l(w) / n) for every index point."""
    if loadings.k != fit.k:
        raise DimensionMismatch(f"loadings have k={loadings.k}, fit has k={fit.k}")
    L = loadings.loadings
    quad = np.einsum("ij,jk,ik->i", L, fit.Omega_hat, L)
    sigma = np.sqrt(np.clip(quad, 0.0, None) / fit.n)
    if not allow_degenerate and np.any(sigma < DEGENERATE_SIGMA_TOL):
        i = int(np.argmin(sigma))
        raise DegenerateVariance(
            f"sigma_hat={sigma[i]:.3e} at index point {loadings.grid[i].tolist()}: "
            "Omega_hat is rank deficient along this loading"
        )
    return sigma


def _central_diff(g: Callable, X: np.ndarray, coord: int, order: int) -> np.ndarray:
    h = 1e-6 if order == 1 else 1e-4
    e = np.zeros(X.shape[1])
    e[coord] = h
    if order == 1:
        return (g(X + e) - g(X - e)) / (2 * h)
    return (g(X + e) - 2 * g(X) + g(X - e)) / h**2


def true_theta(spec: FunctionalSpec, g: Callable, dim: int) -> np.ndarray:
    """theta(w) for a known g, applying the operator numerically (central differences, quadrature)."""
    if spec.kind == "value":
        return np.asarray(g(spec.grid), dtype=float)
    if spec.kind == "partial_derivative":
        return _central_diff(g, spec.grid, spec.coord, spec.order)
    if spec.kind == "average_derivative":
        return np.array([spec.measure.weights @ _central_diff(g, spec.measure.nodes, spec.coord, 1)])
    out = []
    for x2, q in zip(spec.grid, spec.cond_measures):
        pts = _embed(q.nodes[:, 0], x2, spec.coord)
        out.append(q.weights @ _central_diff(g, pts, spec.coord, 1))
    return np.array(out)


def projection_coefficients(basis: Basis, g: Callable, F: Quadrature) -> np.ndarray:
    """beta_g = argmin_b int (g - p'b)^2 dF, via a dense solve of the quadrature normal equations."""
    P = basis.eval(F.nodes)
    G = (P * F.weights[:, None]).T @ P
    cholesky(G)  # raises NotPositiveDefinite for a collinear dictionary under F
    rhs = P.T @ (F.weights * np.asarray(g(F.nodes), dtype=float))
    return np.linalg.solve(G, rhs)


def remainder_oracle(spec: FunctionalSpec, basis: Basis, g: Callable, F: Quadrature) -> np.ndarray:
    """r_theta(w) = theta(w) - l(w)'beta_g with beta_g the F-projection of g."""
    beta_g = projection_coefficients(basis, g, F)
    L = _raw_loadings(spec, basis)
    return true_theta(spec, g, basis.dim) - L @ beta_g
