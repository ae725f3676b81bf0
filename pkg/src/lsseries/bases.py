"""Series bases on [0,1]^d: evaluation, analytic derivatives, orthonormalization, diagnostics.

Every concrete basis maps points x in [0,1]^d to k-vectors p(x). Evaluation is
vectorized: ``basis.eval(X)`` with ``X`` of shape (n, d) returns an (n, k) array.
A scalar (d = 1) or a single length-d point returns a length-k vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .errors import InvalidSpec, NotDifferentiable, NotPositiveDefinite, OutOfDomain
from .numutil import Quadrature, cholesky, composite_gauss_legendre, gauss_legendre, uniform_grid

FAMILIES = ("legendre", "fourier", "bspline", "local_poly_partition", "monomial", "tensor", "additive")
DOMAIN_TOL = 1e-12
MAX_DIM = 3


@dataclass(frozen=True)
class BasisSpec:
    """Declarative basis description.

    ``order`` is the polynomial order s0 for ``bspline`` (degree) and
    ``local_poly_partition``. ``components`` lists one-dimensional specs for
    ``tensor`` (all interactions) and ``additive`` (main effects only).
    ``orthonormal`` requests orthonormalization under U(0,1) for the families
    that are not orthonormal by construction (``bspline``, ``monomial``).
    """

    family: str
    k: int | None = None
    order: int = 3
    components: tuple["BasisSpec", ...] = ()
    orthonormal: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "components", tuple(self.components))
        if self.family not in FAMILIES:
            raise InvalidSpec(f"unknown basis family {self.family!r}; expected one of {FAMILIES}")
        if self.family in ("tensor", "additive"):
            if not 1 <= len(self.components) <= MAX_DIM:
                raise InvalidSpec(f"{self.family} needs 1..{MAX_DIM} components, got {len(self.components)}")
            for c in self.components:
                if c.family in ("tensor", "additive"):
                    raise InvalidSpec(f"{self.family} components must be one-dimensional")
            ks = [c.k for c in self.components]
            if self.family == "tensor":
                expected = int(np.prod(ks))
            else:
                expected = ks[0] + sum(kc - 1 for kc in ks[1:])
            if self.k is not None and self.k != expected:
                raise InvalidSpec(f"{self.family} k must equal {expected} for components {ks}, got {self.k}")
            object.__setattr__(self, "k", expected)
            return
        if self.k is None or int(self.k) < 1:
            raise InvalidSpec(f"k must be a positive integer, got {self.k!r}")
        k, s0 = int(self.k), int(self.order)
        if self.family == "fourier" and k % 2 == 0:
            raise InvalidSpec(f"fourier basis requires odd k, got {k}")
        if self.family == "bspline":
            if s0 < 0:
                raise InvalidSpec("bspline order must be >= 0")
            if k < s0 + 2:
                raise InvalidSpec(f"bspline of order {s0} requires k >= {s0 + 2}, got {k}")
        if self.family == "local_poly_partition":
            if s0 < 0:
                raise InvalidSpec("partition order must be >= 0")
            if k % (s0 + 1):
                raise InvalidSpec(f"local_poly_partition k={k} is not a multiple of order+1={s0 + 1}")

    @property
    def dim(self) -> int:
        return len(self.components) if self.family in ("tensor", "additive") else 1

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"family": self.family, "k": int(self.k)}
        if self.family in ("bspline", "local_poly_partition"):
            d["order"] = int(self.order)
        if self.family in ("tensor", "additive"):
            d["dims"] = [c.to_dict() for c in self.components]
        if self.orthonormal:
            d["orthonormal"] = True
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "BasisSpec":
        allowed = {"family", "k", "order", "dims", "orthonormal"}
        extra = set(d) - allowed
        if extra:
            raise InvalidSpec(f"unknown basis keys {sorted(extra)}")
        if "family" not in d:
            raise InvalidSpec("basis spec needs a 'family' key")
        comps = tuple(cls.from_dict(c) for c in d.get("dims", ()))
        k = d.get("k")
        return cls(
            family=str(d["family"]),
            k=None if k is None else int(k),
            order=int(d.get("order", 3)),
            components=comps,
            orthonormal=bool(d.get("orthonormal", False)),
        )


@dataclass(frozen=True)
class BasisDiagnostics:
    xi_k: float
    xi_k_lipschitz: float
    grid_size: int


class Basis:
    """Evaluable vector of k approximating functions on [0,1]^d."""

    spec: BasisSpec | None = None
    k: int
    dim: int = 1
    orthonormal: bool = False

    # subclasses implement these on validated (n, d) arrays
    def _eval(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _eval_deriv(self, X: np.ndarray, coord: int, order: int) -> np.ndarray:
        raise NotDifferentiable(f"{type(self).__name__} has no derivative")

    @property
    def transform(self) -> np.ndarray:
        return np.eye(self.k)

    def _prepare(self, x) -> tuple[np.ndarray, bool]:
        X = np.asarray(x, dtype=float)
        single = False
        if self.dim == 1:
            if X.ndim == 0:
                X, single = X.reshape(1, 1), True
            elif X.ndim == 1:
                X = X[:, None]
        elif X.ndim == 1:
            X, single = X[None, :], True
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise OutOfDomain(f"expected points of dimension {self.dim}, got array of shape {np.shape(x)}")
        if not np.all(np.isfinite(X)):
            raise OutOfDomain("non-finite coordinate")
        if np.any(X < -DOMAIN_TOL) or np.any(X > 1 + DOMAIN_TOL):
            bad = X[(X < -DOMAIN_TOL) | (X > 1 + DOMAIN_TOL)][0]
            raise OutOfDomain(f"coordinate {bad!r} outside [0, 1]")
        return np.clip(X, 0.0, 1.0), single

    def eval(self, x) -> np.ndarray:
        X, single = self._prepare(x)
        P = self._eval(X)
        return P[0] if single else P

    __call__ = eval

    def eval_deriv(self, x, coord: int = 0, order: int = 1) -> np.ndarray:
        """Analytic partial derivative of order 1 or 2 along coordinate ``coord`` (0-based)."""
        if order not in (1, 2):
            raise InvalidSpec(f"derivative order must be 1 or 2, got {order}")
        if not 0 <= coord < self.dim:
            raise InvalidSpec(f"coordinate {coord} outside dimension {self.dim}")
        X, single = self._prepare(x)
        D = self._eval_deriv(X, coord, order)
        return D[0] if single else D

    def __repr__(self) -> str:
        return f"<{type(self).__name__} k={self.k} d={self.dim}>"


class _Univariate(Basis):
    dim = 1

    def __init__(self, spec: BasisSpec):
        self.spec = spec
        self.k = int(spec.k)
        self.order = int(spec.order)

    def _eval(self, X):
        return self._values(X[:, 0])

    def _eval_deriv(self, X, coord, order):
        return self._derivs(X[:, 0], order)

    def _values(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _derivs(self, t: np.ndarray, m: int) -> np.ndarray:
        raise NotImplementedError

    def breakpoints(self) -> np.ndarray:
        """Points where the functions may lose smoothness (for exact composite quadrature)."""
        return np.array([0.0, 1.0])


def _legendre_table(s: np.ndarray, k: int, m: int = 0) -> np.ndarray:
    """Legendre polynomials P_j(s), j < k, or their m-th derivative, via the three-term recurrence."""
    n = s.shape[0]
    P = np.zeros((n, k))
    D1 = np.zeros((n, k))
    D2 = np.zeros((n, k))
    P[:, 0] = 1.0
    if k > 1:
        P[:, 1] = s
        D1[:, 1] = 1.0
    for j in range(1, k - 1):
        a, b = (2 * j + 1) / (j + 1), j / (j + 1)
        P[:, j + 1] = a * s * P[:, j] - b * P[:, j - 1]
        D1[:, j + 1] = a * (P[:, j] + s * D1[:, j]) - b * D1[:, j - 1]
        D2[:, j + 1] = a * (2.0 * D1[:, j] + s * D2[:, j]) - b * D2[:, j - 1]
    return (P, D1, D2)[m]


class LegendreBasis(_Univariate):
    """Shifted Legendre polynomials, orthonormal under U(0,1): sqrt(2j+1) P_j(2x-1)."""

    orthonormal = True

    def __init__(self, spec):
        super().__init__(spec)
        self._scale = np.sqrt(2.0 * np.arange(self.k) + 1.0)

    def _values(self, t):
        return _legendre_table(2.0 * t - 1.0, self.k) * self._scale

    def _derivs(self, t, m):
        return _legendre_table(2.0 * t - 1.0, self.k, m) * (self._scale * 2.0**m)


class FourierBasis(_Univariate):
    """(1, sqrt2 cos 2pi j x, sqrt2 sin 2pi j x), j = 1..(k-1)/2; orthonormal under U(0,1)."""

    orthonormal = True

    def __init__(self, spec):
        super().__init__(spec)
        self._freq = 2.0 * np.pi * np.arange(1, (self.k - 1) // 2 + 1)

    def _values(self, t):
        out = np.empty((t.shape[0], self.k))
        out[:, 0] = 1.0
        arg = np.outer(t, self._freq)
        out[:, 1::2] = math.sqrt(2.0) * np.cos(arg)
        out[:, 2::2] = math.sqrt(2.0) * np.sin(arg)
        return out

    def _derivs(self, t, m):
        out = np.zeros((t.shape[0], self.k))
        arg = np.outer(t, self._freq)
        c, s = math.sqrt(2.0) * np.cos(arg), math.sqrt(2.0) * np.sin(arg)
        if m == 1:
            out[:, 1::2] = -s * self._freq
            out[:, 2::2] = c * self._freq
        else:
            out[:, 1::2] = -c * self._freq**2
            out[:, 2::2] = -s * self._freq**2
        return out


class BSplineBasis(_Univariate):
    """B-splines of degree s0 on clamped, equally spaced knots (Cox-de Boor recurrence).

    Knot spans are right-continuous [t_i, t_{i+1}); x = 1 falls in the last span.
    """

    def __init__(self, spec):
        super().__init__(spec)
        s0 = self.order
        n_interior = self.k - s0 - 1
        interior = np.arange(1, n_interior + 1) / (n_interior + 1)
        self.knots = np.concatenate([np.zeros(s0 + 1), interior, np.ones(s0 + 1)])

    def breakpoints(self):
        return np.unique(self.knots)

    def _degree_tables(self, t: np.ndarray, top: int) -> list[np.ndarray]:
        """B-spline tables for degrees 0..top; the degree-p table has len(knots)-1-p columns."""
        kn = self.knots
        nspan = kn.shape[0] - 1
        span = np.searchsorted(kn, t, side="right") - 1
        span = np.clip(span, self.order, self.k - 1)
        B = np.zeros((t.shape[0], nspan))
        B[np.arange(t.shape[0]), span] = 1.0
        tables = [B]
        for p in range(1, top + 1):
            ncol = nspan - p
            left_den = kn[p : p + ncol] - kn[:ncol]
            right_den = kn[p + 1 : p + 1 + ncol] - kn[1 : 1 + ncol]
            with np.errstate(divide="ignore", invalid="ignore"):
                left = np.where(left_den > 0, (t[:, None] - kn[:ncol]) / left_den, 0.0)
                right = np.where(right_den > 0, (kn[p + 1 : p + 1 + ncol] - t[:, None]) / right_den, 0.0)
            prev = tables[-1]
            tables.append(left * prev[:, :ncol] + right * prev[:, 1 : ncol + 1])
        return tables

    def _values(self, t):
        return self._degree_tables(t, self.order)[-1]

    def _derivs(self, t, m):
        s0 = self.order
        if s0 < m:
            raise NotDifferentiable(f"B-splines of degree {s0} have no derivative of order {m}")
        kn = self.knots
        cur = self._degree_tables(t, s0 - m)[-1]
        # apply d/dx B_{i,p} = p (B_{i,p-1}/(t_{i+p}-t_i) - B_{i+1,p-1}/(t_{i+p+1}-t_{i+1}))
        for p in range(s0 - m + 1, s0 + 1):
            ncol = kn.shape[0] - 1 - p
            left_den = kn[p : p + ncol] - kn[:ncol]
            right_den = kn[p + 1 : p + 1 + ncol] - kn[1 : 1 + ncol]
            with np.errstate(divide="ignore"):
                lc = np.where(left_den > 0, p / left_den, 0.0)
                rc = np.where(right_den > 0, p / right_den, 0.0)
            cur = lc * cur[:, :ncol] - rc * cur[:, 1 : ncol + 1]
        return cur


class LocalPolyPartitionBasis(_Univariate):
    """Piecewise polynomials of degree <= s0 on k/(s0+1) equal cells, orthonormal under U(0,1).

    On cell c the functions are sqrt(K) sqrt(2q+1) P_q(2u-1), u the local
    coordinate, K the cell count: the Gram-Schmidt output of the cell-restricted
    monomials. Cells are [l_{c-1}, l_c), with x = 1 assigned to the last cell.
    """

    orthonormal = True

    def __init__(self, spec):
        super().__init__(spec)
        self.cells = self.k // (self.order + 1)
        self._scale = np.sqrt(self.cells * (2.0 * np.arange(self.order + 1) + 1.0))

    def breakpoints(self):
        return np.linspace(0.0, 1.0, self.cells + 1)

    def _locate(self, t):
        c = np.minimum(np.floor(t * self.cells).astype(int), self.cells - 1)
        u = t * self.cells - c
        return c, u

    def _fill(self, t, table):
        c, _ = self._locate(t)
        out = np.zeros((t.shape[0], self.k))
        cols = c[:, None] * (self.order + 1) + np.arange(self.order + 1)
        np.put_along_axis(out, cols, table, axis=1)
        return out

    def _values(self, t):
        _, u = self._locate(t)
        return self._fill(t, _legendre_table(2.0 * u - 1.0, self.order + 1) * self._scale)

    def _derivs(self, t, m):
        if self.order < m:
            raise NotDifferentiable(f"partition series of order {self.order} has no derivative of order {m}")
        _, u = self._locate(t)
        table = _legendre_table(2.0 * u - 1.0, self.order + 1, m) * self._scale * (2.0 * self.cells) ** m
        return self._fill(t, table)


class MonomialBasis(_Univariate):
    """Raw powers (1, x, ..., x^{k-1}); not orthonormal."""

    def _values(self, t):
        return t[:, None] ** np.arange(self.k)

    def _derivs(self, t, m):
        j = np.arange(self.k)
        coef = j.astype(float) if m == 1 else (j * (j - 1)).astype(float)
        powers = np.maximum(j - m, 0)
        return coef * t[:, None] ** powers


class TensorBasis(Basis):
    """All products of one-dimensional component functions; first component varies slowest."""

    def __init__(self, components: Sequence[Basis], spec: BasisSpec | None = None):
        self.components = tuple(components)
        self.spec = spec
        self.dim = len(self.components)
        self.k = int(np.prod([c.k for c in self.components]))
        self.orthonormal = all(c.orthonormal for c in self.components)

    @staticmethod
    def _outer(tables):
        out = tables[0]
        for t in tables[1:]:
            out = (out[:, :, None] * t[:, None, :]).reshape(out.shape[0], -1)
        return out

    def _eval(self, X):
        return self._outer([c._eval(X[:, [j]]) for j, c in enumerate(self.components)])

    def _eval_deriv(self, X, coord, order):
        tables = [
            c._eval_deriv(X[:, [j]], 0, order) if j == coord else c._eval(X[:, [j]])
            for j, c in enumerate(self.components)
        ]
        return self._outer(tables)


class AdditiveBasis(Basis):
    """Main-effects dictionary: all functions of the first component, then functions 2..k_j of the others.

    Dropping the leading function of later components removes the collinearity
    between their constants (or partitions of unity) and the first component.
    """

    def __init__(self, components: Sequence[Basis], spec: BasisSpec | None = None):
        self.components = tuple(components)
        self.spec = spec
        self.dim = len(self.components)
        self.k = self.components[0].k + sum(c.k - 1 for c in self.components[1:])

    def _eval(self, X):
        parts = [self.components[0]._eval(X[:, [0]])]
        parts += [c._eval(X[:, [j]])[:, 1:] for j, c in enumerate(self.components) if j > 0]
        return np.hstack(parts)

    def _eval_deriv(self, X, coord, order):
        parts = []
        for j, c in enumerate(self.components):
            if j == coord:
                block = c._eval_deriv(X[:, [j]], 0, order)
            else:
                block = np.zeros((X.shape[0], c.k))
            parts.append(block if j == 0 else block[:, 1:])
        return np.hstack(parts)


class TransformedBasis(Basis):
    """p(x) = T q(x) for a base basis q and a lower-triangular k x k matrix T."""

    def __init__(self, base: Basis, T: np.ndarray, orthonormal: bool = False):
        if isinstance(base, TransformedBasis):
            T = np.asarray(T) @ base._T
            base = base.base
        self.base = base
        self._T = np.asarray(T, dtype=float)
        self.spec = base.spec
        self.k = base.k
        self.dim = base.dim
        self.orthonormal = orthonormal

    @property
    def transform(self):
        return self._T

    def breakpoints(self):
        return self.base.breakpoints() if hasattr(self.base, "breakpoints") else np.array([0.0, 1.0])

    def _eval(self, X):
        return self.base._eval(X) @ self._T.T

    def _eval_deriv(self, X, coord, order):
        return self.base._eval_deriv(X, coord, order) @ self._T.T


class FunctionBasis(Basis):
    """Basis from explicit callables (vectorized over an (n, d) array or an (n,) array when d = 1)."""

    def __init__(
        self,
        funcs: Sequence[Callable],
        derivs: dict[tuple[int, int], Sequence[Callable]] | None = None,
        dim: int = 1,
    ):
        self.funcs = tuple(funcs)
        self.derivs = derivs or {}
        self.dim = dim
        self.k = len(self.funcs)

    def _arg(self, X):
        return X[:, 0] if self.dim == 1 else X

    def _eval(self, X):
        a = self._arg(X)
        return np.column_stack([np.broadcast_to(f(a), (X.shape[0],)) for f in self.funcs]).astype(float)

    def _eval_deriv(self, X, coord, order):
        fs = self.derivs.get((coord, order))
        if fs is None:
            raise NotDifferentiable(f"no derivative of order {order} along coordinate {coord} supplied")
        a = self._arg(X)
        return np.column_stack([np.broadcast_to(f(a), (X.shape[0],)) for f in fs]).astype(float)


_UNIVARIATE = {
    "legendre": LegendreBasis,
    "fourier": FourierBasis,
    "bspline": BSplineBasis,
    "local_poly_partition": LocalPolyPartitionBasis,
    "monomial": MonomialBasis,
}


def _uniform_measure(basis: Basis) -> Quadrature:
    if hasattr(basis, "breakpoints"):
        return composite_gauss_legendre(basis.breakpoints(), nodes_per_interval=max(10, basis.k))
    return gauss_legendre(1)


def make_basis(spec: BasisSpec | dict) -> Basis:
    """Build an evaluable basis from a spec (or its dict form)."""
    if isinstance(spec, dict):
        spec = BasisSpec.from_dict(spec)
    if spec.family in ("tensor", "additive"):
        comps = [make_basis(c) for c in spec.components]
        cls = TensorBasis if spec.family == "tensor" else AdditiveBasis
        return cls(comps, spec)
    basis = _UNIVARIATE[spec.family](spec)
    if spec.orthonormal and not basis.orthonormal:
        basis = orthonormalize(basis, _uniform_measure(basis))
    return basis


def gram(basis: Basis, measure: Quadrature) -> np.ndarray:
    P = basis.eval(measure.nodes)
    G = (P * measure.weights[:, None]).T @ P
    return 0.5 * (G + G.T)


def orthonormalize(basis: Basis, measure: Quadrature) -> TransformedBasis:
    """Return T p with Gram(T p) = I under ``measure``; T = L^{-1} for the Cholesky factor L of the Gram."""
    G = gram(basis, measure)
    try:
        L = cholesky(G)
    except NotPositiveDefinite as exc:
        raise NotPositiveDefinite(
            f"basis functions are collinear under the measure: {exc}", pivot=exc.pivot, index=exc.index
        ) from None
    T = np.linalg.solve(L, np.eye(basis.k))
    T = np.tril(T)
    return TransformedBasis(basis, T, orthonormal=True)


def default_diagnostic_grid(dim: int) -> int:
    return {1: 4096, 2: 256, 3: 64}[dim]


def diagnostics(basis: Basis, grid_points_per_dim: int | None = None) -> BasisDiagnostics:
    """Grid lower bounds for xi_k = sup ||p(x)|| and the Lipschitz constant of p(x)/||p(x)||."""
    m = default_diagnostic_grid(basis.dim) if grid_points_per_dim is None else int(grid_points_per_dim)
    if m < 64:
        raise InvalidSpec("diagnostics grid needs at least 64 points per dimension")
    d = basis.dim
    X = uniform_grid(m, d)
    P = basis.eval(X)
    norms = np.linalg.norm(P, axis=1)
    xi = float(norms.max())
    with np.errstate(invalid="ignore", divide="ignore"):
        A = P / norms[:, None]
    A = A.reshape((m,) * d + (basis.k,))
    h = 1.0 / (m - 1)
    lip = 0.0
    for ax in range(d):
        diff = np.linalg.norm(np.diff(A, axis=ax), axis=-1) / h
        if np.any(np.isfinite(diff)):
            lip = max(lip, float(np.nanmax(diff)))
    return BasisDiagnostics(xi_k=xi, xi_k_lipschitz=lip, grid_size=int(X.shape[0]))


def rule_of_thumb_k(n: int, spec: BasisSpec) -> int:
    """Heuristic k = ceil(n^{1/3}) adjusted up to the nearest value the family admits.

    This is NOT a theoretically justified choice of k; it only gives a starting point.
    """
    k = max(1, math.ceil(n ** (1.0 / 3.0) - 1e-12))
    if spec.family == "fourier" and k % 2 == 0:
        k += 1
    if spec.family == "bspline":
        k = max(k, spec.order + 2)
    if spec.family == "local_poly_partition":
        step = spec.order + 1
        k = step * math.ceil(k / step)
    return k
