"""Deterministic numeric substrate: seeded streams, quadrature, symmetric linear algebra."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DimensionTooLarge, NotPositiveDefinite, NotPSD, NotSymmetric

_MASK64 = (1 << 64) - 1
# SplitMix64 constants (Steele, Lea & Flood 2014).
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

DEFAULT_NODES = {1: 200, 2: 60, 3: 30}


def splitmix64(z: int) -> int:
    """One SplitMix64 output step applied to ``z``."""
    z = (z + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


@dataclass(frozen=True)
class RandomStream:
    """Immutable descriptor of a reproducible random stream.

    The PCG64 seed is ``splitmix64(master_seed ^ splitmix64(stream_id))``, so
    streams never share global state and can be consumed in any order.
    Calling a draw function twice on the same descriptor returns the same
    values; use :meth:`child` to obtain a fresh, independent stream.
    """

    master_seed: int
    stream_id: int = 0

    def __post_init__(self) -> None:
        for name in ("master_seed", "stream_id"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or not 0 <= int(v) <= _MASK64:
                raise ValueError(f"{name} must be an unsigned 64-bit integer, got {v!r}")

    @property
    def seed64(self) -> int:
        return splitmix64(int(self.master_seed) ^ splitmix64(int(self.stream_id)))

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.seed64))

    def child(self, index: int) -> "RandomStream":
        """Derived stream number ``index`` under this one."""
        sid = splitmix64((int(self.stream_id) * _MIX1 + int(index) + 1) & _MASK64)
        return RandomStream(self.master_seed, sid)


def standard_normal_vector(stream: RandomStream, k: int) -> np.ndarray:
    if k < 1:
        raise ValueError("k must be >= 1")
    return stream.generator().standard_normal(k)


def standard_normal_matrix(stream: RandomStream, rows: int, k: int) -> np.ndarray:
    """``rows`` independent N(0, I_k) vectors, one per row."""
    if rows < 1 or k < 1:
        raise ValueError("rows and k must be >= 1")
    return stream.generator().standard_normal((rows, k))


def exponential_weights(stream: RandomStream, n: int) -> np.ndarray:
    """``n`` i.i.d. standard exponential draws (mean 1, variance 1)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return stream.generator().standard_exponential(n)


@dataclass(frozen=True)
class Quadrature:
    """Nodes (m, d) and strictly positive weights (m,)."""

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim == 1:
            nodes = nodes[:, None]
        weights = np.asarray(self.weights, dtype=float).ravel()
        if nodes.shape[0] != weights.shape[0]:
            raise ValueError("nodes and weights disagree in length")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    def integrate(self, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        """Integrate ``f`` (vectorized over node rows) against the weights."""
        vals = np.asarray(f(self.nodes), dtype=float)
        return np.tensordot(self.weights, vals, axes=(0, 0))


def gauss_legendre(dim: int = 1, nodes_per_dim: int | None = None) -> Quadrature:
    """Tensor-product Gauss-Legendre rule for the uniform probability measure on [0,1]^d."""
    if dim > 3:
        raise DimensionTooLarge(f"tensor quadrature limited to d <= 3, got d={dim}")
    if dim < 1:
        raise ValueError("dim must be >= 1")
    m = DEFAULT_NODES[dim] if nodes_per_dim is None else int(nodes_per_dim)
    if m < 2:
        raise ValueError("nodes_per_dim must be >= 2")
    t, w = np.polynomial.legendre.leggauss(m)
    x1 = 0.5 * (t + 1.0)
    w1 = 0.5 * w
    if dim == 1:
        return Quadrature(x1[:, None], w1)
    grids = np.meshgrid(*([x1] * dim), indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=1)
    wgrid = np.meshgrid(*([w1] * dim), indexing="ij")
    weights = np.prod(np.stack([g.ravel() for g in wgrid], axis=1), axis=1)
    return Quadrature(nodes, weights)


def uniform_grid(points_per_dim: int, dim: int = 1) -> np.ndarray:
    """Equispaced grid over [0,1]^d including the endpoints, shape (m^d, d)."""
    g = np.linspace(0.0, 1.0, int(points_per_dim))
    if dim == 1:
        return g[:, None]
    mesh = np.meshgrid(*([g] * dim), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def as_symmetric(M, tol: float = 1e-12) -> np.ndarray:
    """Validate near-symmetry (relative to max |entry|) and return the symmetrized matrix."""
    A = np.array(M, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise NotSymmetric(f"expected a square matrix, got shape {A.shape}")
    scale = np.max(np.abs(A)) if A.size else 0.0
    asym = np.max(np.abs(A - A.T)) if A.size else 0.0
    if asym > tol * scale:
        raise NotSymmetric(f"matrix asymmetry {asym:.3e} exceeds {tol:g} x max|entry|")
    return 0.5 * (A + A.T)


def _cholesky_pivots(A: np.ndarray) -> np.ndarray:
    """Schur-complement pivots of an unpivoted Cholesky sweep (for error reporting)."""
    A = A.copy()
    k = A.shape[0]
    piv = np.empty(k)
    for j in range(k):
        piv[j] = A[j, j]
        if piv[j] <= 0:
            piv[j + 1 :] = np.nan
            return piv
        col = A[j + 1 :, j] / math.sqrt(piv[j])
        A[j + 1 :, j + 1 :] -= np.outer(col, col)
    return piv


def cholesky(M, rel_tol: float = 1e-10) -> np.ndarray:
    """Lower-triangular ``L`` with ``L @ L.T == M``.

    Raises NotPositiveDefinite when a pivot falls below ``rel_tol * mean(diag(M))``.
    """
    A = as_symmetric(M)
    thresh = rel_tol * float(np.mean(np.diag(A)))
    try:
        L = np.linalg.cholesky(A)
        pivots = np.diag(L) ** 2
    except np.linalg.LinAlgError:
        L = None
        pivots = _cholesky_pivots(A)
    bad = np.flatnonzero(~(pivots >= thresh))
    if L is None or bad.size or not thresh > 0:
        idx = int(bad[0]) if bad.size else 0
        pivot = float(pivots[idx])
        raise NotPositiveDefinite(
            f"Cholesky pivot {pivot:.3e} at index {idx} below {rel_tol:g} x mean diagonal",
            pivot=pivot,
            index=idx,
        )
    return L


def sym_sqrt(M, rel_tol: float = 1e-10) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition with relative eigenvalue clipping."""
    A = as_symmetric(M)
    vals, vecs = np.linalg.eigh(A)
    top = max(float(vals[-1]), 0.0)
    if vals[0] < -rel_tol * top:
        raise NotPSD(f"most negative eigenvalue {vals[0]:.3e} below -{rel_tol:g} x max eigenvalue")
    vals = np.clip(vals, 0.0, None)
    S = (vecs * np.sqrt(vals)) @ vecs.T
    return 0.5 * (S + S.T)


def psd_factor(M, rel_tol: float = 1e-10) -> np.ndarray:
    """Factor ``F`` with ``F @ F.T == M``: Cholesky when positive definite, else the symmetric root."""
    try:
        return cholesky(M, rel_tol)
    except NotPositiveDefinite:
        return sym_sqrt(M, rel_tol)


def operator_norm(M) -> float:
    """Spectral norm of a symmetric matrix."""
    vals = np.linalg.eigvalsh(as_symmetric(M, tol=1e-8))
    return float(np.max(np.abs(vals)))


def composite_gauss_legendre(breakpoints, nodes_per_interval: int = 10) -> Quadrature:
    """Piecewise Gauss-Legendre rule on [breakpoints[0], breakpoints[-1]], normalized to total mass 1.

    Exact for piecewise polynomials of degree <= 2*nodes_per_interval - 1 whose
    pieces join at the breakpoints (splines, partition series).
    """
    b = np.unique(np.asarray(breakpoints, dtype=float))
    t, w = np.polynomial.legendre.leggauss(int(nodes_per_interval))
    lo, hi = b[:-1, None], b[1:, None]
    nodes = (0.5 * (hi - lo) * (t + 1.0) + lo).ravel()
    weights = (0.5 * (hi - lo) * w).ravel()
    weights = weights / weights.sum()
    return Quadrature(nodes[:, None], weights)
