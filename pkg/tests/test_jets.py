import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from qgeom import jets as J
from qgeom.errors import ArgumentError, SingularValueError

from oracles import fd_partial

DIM, DEG = 3, 4
NC = J.num_coefficients(DIM, DEG)
coeffs = arrays(np.float64, (NC,), elements=st.floats(-2, 2, allow_nan=False, width=64))
points = arrays(np.float64, (DIM,), elements=st.floats(-0.6, 0.6, width=64))


def jet(c, shift=0.0):
    j = J.Jet(np.asarray(c)[None], DIM, DEG)
    return j + shift if shift else j


def probe(X):
    if isinstance(X[0], J.Jet):
        return J.exp(J.sin(X[0]) * X[1] * 0.3) + J.cos(X[2]) * X[0] * X[0] + J.sqrt(X[1] * X[2] + 2.0)
    return np.exp(0.3 * np.sin(X[0]) * X[1]) + np.cos(X[2]) * X[0] ** 2 + np.sqrt(X[1] * X[2] + 2.0)


def test_multi_index_count():
    assert len(J.multi_indices(DIM, DEG)) == math.comb(DIM + DEG, DEG) == NC
    assert J.multi_indices(DIM, DEG)[0] == (0, 0, 0)


@given(coeffs, coeffs, coeffs)
@settings(max_examples=30, deadline=None)
def test_ring_laws(a, b, c):
    a, b, c = jet(a), jet(b), jet(c)
    np.testing.assert_allclose((a + b).c, (b + a).c, atol=1e-14)
    np.testing.assert_allclose((a * b).c, (b * a).c, atol=1e-13)
    np.testing.assert_allclose(((a * b) * c).c, (a * (b * c)).c, atol=1e-11)
    np.testing.assert_allclose((a * (b + c)).c, (a * b + a * c).c, atol=1e-12)


@given(coeffs, coeffs)
@settings(max_examples=30, deadline=None)
def test_division_inverts_multiplication(a, b):
    a, b = jet(a), jet(b, shift=5.0)
    np.testing.assert_allclose(((a * b) / b).c, a.c, atol=1e-10)


@given(points)
@settings(max_examples=15, deadline=None)
def test_partials_match_finite_differences(x):
    j = probe(J.variables(x[None], DEG))
    for alpha in J.multi_indices(DIM, DEG):
        fd = fd_partial(probe, x, alpha)
        assert abs(J.extract_partial(j, alpha)[0] - fd) <= 1e-6 * max(1.0, abs(fd)), alpha


@given(points)
@settings(max_examples=20, deadline=None)
def test_truncation_commutes_with_evaluation(x):
    hi = probe(J.variables(x[None], 4)).truncate(2)
    lo = probe(J.variables(x[None], 2))
    np.testing.assert_array_equal(hi.c, lo.c)


@given(coeffs)
@settings(max_examples=20, deadline=None)
def test_exp_log_roundtrip(a):
    a = jet(a) * 0.2
    np.testing.assert_allclose(J.log(J.exp(a)).c, a.c, atol=1e-11)


def test_variable_jet_structure():
    x = J.jet_variable(1, 0.7, DIM, DEG)
    assert x.partial((0, 1, 0)) == pytest.approx(1.0)
    assert x.partial((0, 0, 0)) == pytest.approx(0.7)
    assert x.partial((0, 2, 0)) == 0.0


@pytest.mark.parametrize("fn, exact", [(J.sin, np.cos), (J.cos, lambda v: -np.sin(v)),
                                       (J.exp, np.exp)])
def test_elementary_first_derivatives(fn, exact):
    X = J.variables(np.array([[0.3, -0.2, 0.1]]), 2)
    assert fn(X[0]).partial((1, 0, 0))[0] == pytest.approx(exact(0.3), rel=1e-14)


def test_grad_and_diff_agree():
    X = J.variables(np.array([[0.3, -0.2, 0.1]]), 3)
    f = probe(X)
    g = f.grad()
    for i in range(DIM):
        np.testing.assert_allclose(g.c[..., i, :], f.diff(i).c)


def test_jeinsum_contracts_tensor_axes():
    X = J.variables(np.array([[0.3, -0.2, 0.1], [0.1, 0.2, 0.3]]), 2)
    m = J.tensor([[X[0], X[1]], [X[1], X[2]]])
    tr = J.jeinsum("...ii->...", m)
    np.testing.assert_allclose(tr.c, (X[0] + X[2]).c)


@pytest.mark.parametrize("alpha", [(0, 0), (1, 0, 0, 0), (-1, 0, 1)])
def test_bad_multi_index(alpha):
    with pytest.raises(ArgumentError):
        J.variables(np.zeros((1, 3)), 2)[0].partial(alpha)


def test_partial_beyond_degree():
    with pytest.raises(ArgumentError):
        J.variables(np.zeros((1, 3)), 2)[0].partial((3, 0, 0))


def test_log_of_negative_value():
    with pytest.raises(SingularValueError):
        J.log(J.variables(np.array([[-1.0, 0.0, 0.0]]), 2)[0])


def test_division_by_zero_constant():
    with pytest.raises(SingularValueError):
        J.reciprocal(J.variables(np.zeros((1, 3)), 2)[0])


def test_degree_limit():
    with pytest.raises(ArgumentError):
        J.variables(np.zeros((1, 3)), J.MAX_DEGREE + 1)
