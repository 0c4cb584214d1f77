import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qgeom import models as M
from qgeom import quadrature as Qd
from qgeom.errors import ArgumentError


@pytest.mark.parametrize("model_id, exact", [
    ("torus3", (2 * math.pi) ** 3), ("torus4", (2 * math.pi) ** 4),
    ("sphere3", 2 * math.pi ** 2), ("sphere4", 8 * math.pi ** 2 / 3),
    ("sphere5", M.sphere_volume(5)), ("s2xs2", (4 * math.pi) ** 2),
    ("s2cubed", (4 * math.pi) ** 3), ("sphere4:r=2", 16 * 8 * math.pi ** 2 / 3),
])
def test_exact_volumes(model_id, exact):
    m = M.get_model(model_id)
    assert Qd.volume(m, Qd.build_rule(m, 8)) == pytest.approx(exact, rel=1e-13)


@pytest.mark.parametrize("res", [3, 0, 4.5, (8, 8)])
def test_bad_resolution(res):
    with pytest.raises(ArgumentError):
        Qd.build_rule(M.get_model("torus4"), res)


def test_weights_sum_to_chart_measure():
    m = M.get_model("sphere3")
    rule = Qd.build_rule(m, 6)
    assert rule.size == 216 and rule.nodes.shape == (216, 3)
    _, w = rule.reduced()
    assert np.sum(w) == pytest.approx(2 * math.pi ** 2, rel=1e-13)


def test_reduced_rule_matches_full_grid():
    m = M.get_model("torus4-perturbed")
    rule = Qd.build_rule(m, 8)
    f = M.trig("cos", [1, 1, 0, 0])
    full = Qd.integrate_scalar(m, rule, f, depends_on=(0, 1, 2, 3))
    red = Qd.integrate_scalar(m, rule, f)
    assert red == pytest.approx(full, rel=1e-13)


def test_reduced_axis_out_of_range():
    with pytest.raises(ArgumentError):
        Qd.build_rule(M.get_model("torus3"), 4).reduced((0, 5))


@given(st.integers(0, 3), st.integers(0, 3))
@settings(max_examples=16, deadline=None)
def test_sphere_monomials(i, j):
    # int over S^3 of x0^(2i) x1^(2j); Gauss-Jacobi is exact at modest resolution
    m = M.get_model("sphere3")
    f = M.sphere_polynomial(m, {(2 * i, 2 * j, 0, 0): 1.0})
    approx = Qd.integrate_scalar(m, Qd.build_rule(m, 10), f)
    a, b, c = i + 0.5, j + 0.5, 0.5
    exact = 2 * math.gamma(a) * math.gamma(b) * math.gamma(c) ** 2 / math.gamma(a + b + 2 * c)
    assert approx == pytest.approx(exact, rel=1e-12)


def test_doubling_converges_on_conformal_torus():
    m = M.get_model("torus4-conformal")
    v12 = Qd.volume(m, Qd.build_rule(m, 12))
    v24 = Qd.volume(m, Qd.build_rule(m, 24))
    assert abs(v24 - v12) <= 1e-12 * v24


def test_l2_inner_of_metric_is_n_times_volume():
    m = M.get_model("sphere4")
    rule = Qd.build_rule(m, 8)
    g = M.metric_field()
    assert Qd.l2_inner(m, rule, g, g) == pytest.approx(4 * M.sphere_volume(4), rel=1e-12)


def test_chunk_size_positive():
    assert Qd.chunk_size(6, 4) >= 1 and Qd.chunk_size(3, 0) > Qd.chunk_size(3, 4)
