from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.interpolate import BSpline
from scipy.special import eval_legendre

from lsseries.bases import (
    BasisSpec,
    FunctionBasis,
    TransformedBasis,
    diagnostics,
    gram,
    make_basis,
    orthonormalize,
    rule_of_thumb_k,
)
from lsseries.errors import InvalidSpec, NotDifferentiable, NotPositiveDefinite, OutOfDomain
from lsseries.numutil import composite_gauss_legendre, gauss_legendre, uniform_grid

X = np.linspace(0.0, 1.0, 401)


def basis(family, k, **kw):
    return make_basis(BasisSpec(family, k, **kw))


def quad_for(b):
    if hasattr(b, "breakpoints") and len(b.breakpoints()) > 2:
        return composite_gauss_legendre(b.breakpoints(), 20)
    return gauss_legendre(1)


# --- closed-form values ----------------------------------------------------


def test_legendre_closed_forms():
    b = basis("legendre", 3)
    assert np.allclose(b(1.0), [1.0, math.sqrt(3), math.sqrt(5)], atol=1e-14)
    assert np.allclose(b(0.5), [1.0, 0.0, -math.sqrt(5) / 2], atol=1e-14)
    assert np.allclose(b.eval_deriv(X)[:, 1], 2 * math.sqrt(3), atol=1e-12)


def test_legendre_matches_scipy():
    k = 12
    P = basis("legendre", k).eval(X)
    ref = np.column_stack([math.sqrt(2 * j + 1) * eval_legendre(j, 2 * X - 1) for j in range(k)])
    assert np.max(np.abs(P - ref)) < 1e-12


def test_fourier_closed_forms():
    b = basis("fourier", 3)
    assert np.allclose(b(0.0), [1.0, math.sqrt(2), 0.0], atol=1e-15)
    assert np.allclose(b.eval_deriv(0.0), [0.0, 0.0, 2 * math.pi * math.sqrt(2)], atol=1e-12)
    b7 = basis("fourier", 7)
    x = 0.37
    ref = [1.0]
    for j in (1, 2, 3):
        ref += [math.sqrt(2) * math.cos(2 * math.pi * j * x), math.sqrt(2) * math.sin(2 * math.pi * j * x)]
    assert np.allclose(b7(x), ref, atol=1e-14)


@pytest.mark.parametrize("order,k", [(0, 5), (1, 6), (2, 7), (3, 12)])
def test_bspline_matches_scipy(order, k):
    b = basis("bspline", k, order=order)
    ref = BSpline.design_matrix(X, b.knots, order).toarray()
    assert np.max(np.abs(b.eval(X) - ref)) < 1e-13


@pytest.mark.parametrize("order,k", [(1, 8), (2, 9), (3, 12)])
def test_bspline_derivatives_match_scipy(order, k):
    b = basis("bspline", k, order=order)
    for m in range(1, min(order, 2) + 1):
        ref = np.column_stack(
            [BSpline(b.knots, np.eye(k)[j], order).derivative(m)(X[1:-1]) for j in range(k)]
        )
        assert np.max(np.abs(b.eval_deriv(X[1:-1], order=m) - ref)) < 1e-9 * max(1.0, np.max(np.abs(ref)))


@pytest.mark.parametrize("order", [0, 1, 2, 3])
def test_bspline_partition_of_unity(order):
    b = basis("bspline", order + 6, order=order)
    assert np.max(np.abs(b.eval(X).sum(axis=1) - 1.0)) <= 1e-12


def test_partition_series_cells():
    b = basis("local_poly_partition", 4, order=0)
    v = b(0.3)
    assert np.count_nonzero(v) == 1 and v[1] == pytest.approx(2.0)
    assert np.count_nonzero(b(1.0)) == 1 and b(1.0)[3] != 0
    b1 = basis("local_poly_partition", 6, order=1)
    # cell 0 of 3 at local u = 0.5: (sqrt3, sqrt3 * sqrt3 * 0)
    assert np.allclose(b1(1 / 6)[:2], [math.sqrt(3), 0.0], atol=1e-12)


def test_tensor_and_additive_values():
    t = make_basis(BasisSpec("tensor", components=(BasisSpec("legendre", 2), BasisSpec("legendre", 2))))
    assert t.k == 4
    assert np.allclose(t([1.0, 1.0]), [1.0, math.sqrt(3), math.sqrt(3), 3.0])
    a = make_basis(BasisSpec("additive", components=(BasisSpec("legendre", 3), BasisSpec("legendre", 3))))
    assert a.k == 5
    x = np.array([0.2, 0.9])
    l3 = basis("legendre", 3)
    assert np.allclose(a(x), np.concatenate([l3(0.2), l3(0.9)[1:]]))
    d = a.eval_deriv(x, coord=1)
    assert np.allclose(d, np.concatenate([[0, 0, 0], l3.eval_deriv(0.9)[1:]]))


# --- orthonormality and exactness -------------------------------------------


@pytest.mark.parametrize(
    "spec",
    [
        BasisSpec("legendre", 15),
        BasisSpec("fourier", 11),
        BasisSpec("local_poly_partition", 12, order=2),
        BasisSpec("bspline", 10, order=3, orthonormal=True),
        BasisSpec("monomial", 6, orthonormal=True),
        BasisSpec("tensor", components=(BasisSpec("legendre", 3), BasisSpec("fourier", 3))),
    ],
)
def test_orthonormal_families(spec):
    b = make_basis(spec)
    if b.dim == 1:
        q = quad_for(b)
    else:
        q = gauss_legendre(2, 30)
    assert b.orthonormal
    assert np.max(np.abs(gram(b, q) - np.eye(b.k))) <= 1e-8


def test_fourier_orthonormal_under_design_gl():
    b = basis("fourier", 21)
    assert np.max(np.abs(gram(b, gauss_legendre(1)) - np.eye(21))) <= 1e-8


def test_orthonormalize_examples():
    q = gauss_legendre(1)
    T = orthonormalize(basis("legendre", 5), q).transform
    assert np.max(np.abs(T - np.eye(5))) <= 1e-8
    mono = orthonormalize(basis("monomial", 3), q)
    G = gram(mono, q)
    assert np.max(np.abs(G - np.eye(3))) <= 1e-8
    assert np.allclose(np.triu(mono.transform, 1), 0.0)
    # the orthonormalized monomials are the shifted Legendre polynomials (up to sign)
    assert np.allclose(np.abs(mono.eval(X)), np.abs(basis("legendre", 3).eval(X)), atol=1e-10)
    pair = FunctionBasis([lambda x: x, lambda x: 2 * x])
    with pytest.raises(NotPositiveDefinite):
        orthonormalize(pair, q)


def test_transformed_composition():
    b = basis("monomial", 3)
    T1 = np.array([[1.0, 0, 0], [1, 2, 0], [0, 1, 3]])
    T2 = np.array([[2.0, 0, 0], [0, 1, 0], [1, 0, 1]])
    once = TransformedBasis(TransformedBasis(b, T1), T2)
    assert np.allclose(once.eval(X), b.eval(X) @ (T2 @ T1).T)


FD_CASES = [
    BasisSpec("legendre", 10),
    BasisSpec("fourier", 9),
    BasisSpec("bspline", 10, order=3),
    BasisSpec("bspline", 8, order=2),
    BasisSpec("local_poly_partition", 9, order=2),
    BasisSpec("monomial", 5),
]


@pytest.mark.parametrize("spec", FD_CASES, ids=lambda s: f"{s.family}{s.k}")
def test_derivatives_against_central_differences(spec):
    b = make_basis(spec)
    xi = diagnostics(b).xi_k
    h = 1e-6
    # stay away from knots, where higher derivatives jump
    pts = np.linspace(0.013, 0.987, 157)
    if hasattr(b, "breakpoints"):
        pts = pts[np.min(np.abs(pts[:, None] - b.breakpoints()[None, :]), axis=1) > 1e-3]
    fd = (b.eval(pts + h) - b.eval(pts - h)) / (2 * h)
    assert np.max(np.abs(b.eval_deriv(pts) - fd)) <= 1e-5 * xi
    hh = 1e-4
    fd2 = (b.eval(pts + hh) - 2 * b.eval(pts) + b.eval(pts - hh)) / hh**2
    if spec.order >= 2 or spec.family in ("legendre", "fourier", "monomial"):
        d2 = b.eval_deriv(pts, order=2)
        assert np.max(np.abs(d2 - fd2)) <= 1e-3 * max(1.0, np.max(np.abs(d2)))


def test_tensor_derivative_against_central_difference():
    b = make_basis(BasisSpec("tensor", components=(BasisSpec("legendre", 4), BasisSpec("bspline", 6, order=3))))
    pts = np.array([[0.31, 0.47], [0.72, 0.11]])
    h = 1e-6
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        fd = (b.eval(pts + e) - b.eval(pts - e)) / (2 * h)
        assert np.max(np.abs(b.eval_deriv(pts, coord=j) - fd)) < 1e-6


def test_not_differentiable():
    with pytest.raises(NotDifferentiable):
        basis("local_poly_partition", 4, order=0).eval_deriv(0.5)
    with pytest.raises(NotDifferentiable):
        basis("bspline", 5, order=1).eval_deriv(0.5, order=2)
    with pytest.raises(NotDifferentiable):
        FunctionBasis([np.sin]).eval_deriv(0.5)


def test_diagnostics_closed_forms():
    assert diagnostics(basis("legendre", 3)).xi_k == pytest.approx(3.0, abs=1e-6)
    assert diagnostics(basis("fourier", 5)).xi_k == pytest.approx(math.sqrt(5), abs=1e-6)
    assert diagnostics(basis("bspline", 8, order=1)).xi_k <= 3 * math.sqrt(8)
    d = diagnostics(basis("legendre", 4))
    assert d.grid_size == 4096 and d.xi_k_lipschitz > 0
    with pytest.raises(InvalidSpec):
        diagnostics(basis("legendre", 4), 10)


def test_fourier_norm_identity():
    P = basis("fourier", 9).eval(X)
    assert np.allclose(np.sum(P**2, axis=1), 9.0)


# --- guards and serialization -------------------------------------------------


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(family="fourier", k=4),
        dict(family="local_poly_partition", k=5, order=1),
        dict(family="bspline", k=3, order=3),
        dict(family="legendre", k=0),
        dict(family="wavelet", k=4),
        dict(family="tensor", components=()),
    ],
)
def test_invalid_specs(kwargs):
    with pytest.raises(InvalidSpec):
        BasisSpec(**kwargs)


def test_out_of_domain():
    b = basis("legendre", 3)
    with pytest.raises(OutOfDomain):
        b.eval(1.0 + 1e-9)
    with pytest.raises(OutOfDomain):
        b.eval(np.array([0.5, np.nan]))
    # within the 1e-12 tolerance the point is clipped
    assert np.allclose(b.eval(1.0 + 1e-13), b.eval(1.0))
    t = make_basis(BasisSpec("tensor", components=(BasisSpec("legendre", 2), BasisSpec("legendre", 2))))
    with pytest.raises(OutOfDomain):
        t.eval(np.array([[0.5, 0.5, 0.5]]))


spec_strategy = st.one_of(
    st.builds(lambda k: BasisSpec("legendre", k), st.integers(1, 30)),
    st.builds(lambda j: BasisSpec("fourier", 2 * j + 1), st.integers(0, 10)),
    st.builds(lambda s, e: BasisSpec("bspline", s + 2 + e, order=s), st.integers(0, 4), st.integers(0, 10)),
    st.builds(lambda s, c: BasisSpec("local_poly_partition", (s + 1) * c, order=s), st.integers(0, 3), st.integers(1, 6)),
)


@settings(max_examples=80, deadline=None)
@given(spec_strategy, st.floats(0.0, 1.0))
def test_spec_round_trip_and_finite_values(spec, x):
    assert BasisSpec.from_dict(spec.to_dict()) == spec
    v = make_basis(spec).eval(x)
    assert v.shape == (spec.k,) and np.all(np.isfinite(v))


def test_tensor_spec_round_trip():
    s = BasisSpec("tensor", components=(BasisSpec("bspline", 5, order=2), BasisSpec("legendre", 3)))
    d = s.to_dict()
    assert d["k"] == 15 and d["dims"][0]["order"] == 2
    assert BasisSpec.from_dict(d) == s
    with pytest.raises(InvalidSpec):
        BasisSpec.from_dict({"family": "legendre", "k": 3, "colour": 1})


def test_rule_of_thumb_k():
    assert rule_of_thumb_k(1000, BasisSpec("legendre", 1)) == 10
    assert rule_of_thumb_k(1000, BasisSpec("fourier", 1)) == 11
    assert rule_of_thumb_k(8, BasisSpec("bspline", 5, order=3)) == 5
    assert rule_of_thumb_k(1000, BasisSpec("local_poly_partition", 3, order=2)) == 12
