import json
import math

import numpy as np
import pytest

from qgeom import geometry as G
from qgeom import jets as J
from qgeom import models as M
from qgeom import quadrature as Qd
from qgeom import variations as V
from qgeom.errors import ArgumentError, DomainError, PreconditionError


def _setup(model_id, h, count=3, seed=1):
    m = M.get_model(model_id)
    pts = m.interior_points(count, seed=seed)
    s = G.metric_sample(m, pts)
    return m, pts, s, h.on(s)


FIELDS = {
    "conformal": M.conformal_field(M.trig("sin", [1, 1, 0, 0], 0.2)),
    "tt+conformal": M.tt_mode_torus(4, [1, 0, 0, 0], M.standard_tt_polarization(4))
    + M.conformal_field(M.trig("cos", [0, 1, 0, 0])),
}


@pytest.mark.parametrize("model_id", ["torus4-perturbed", "torus4-conformal", "s2xs2"])
@pytest.mark.parametrize("name", list(FIELDS))
@pytest.mark.parametrize("quantity", ["R", "Ric", "Q"])
def test_linearizations_match_fd(model_id, name, quantity):
    h = FIELDS[name]
    m, pts, s, hj = _setup(model_id, h)
    closed = {"R": V.linearized_scalar, "Ric": V.linearized_ricci, "Q": V.gamma_apply}[quantity](s, hj)
    res = V.fd_variation_oracle(m, quantity, h, points=pts, closed_form=closed)
    assert res.rel_err < 1e-6
    assert math.isnan(res.convergence_order_estimate) or 1.6 < res.convergence_order_estimate < 2.4


@pytest.mark.parametrize("n", [3, 4, 5])
def test_scaling_direction(n):
    # g -> (1 + e) g multiplies R by 1/(1 + e) and Q by 1/(1 + e)^2
    m, pts, s, hj = _setup(f"sphere{n}", M.metric_field())
    np.testing.assert_allclose(V.linearized_scalar(s, hj), -s.scalar.value, rtol=1e-11)
    np.testing.assert_allclose(V.gamma_apply(s, hj), -2 * n * (n * n - 4) / 8.0, rtol=1e-10)


@pytest.mark.parametrize("model_id", ["sphere4", "s2xs2", "torus4-perturbed", "sphere5"])
def test_gamma_star_of_one(model_id):
    m = M.get_model(model_id)
    s = G.metric_sample(m, m.interior_points(3, seed=2))
    one = J.Jet.constant(np.ones(s.size), m.dim, 4)
    j = V.pack(s).j.value
    np.testing.assert_allclose(V.gamma_adjoint_apply(s, one), -2 * j, atol=1e-10)


def test_q_critical_residual_on_sphere():
    m = M.get_model("sphere4")
    s = G.metric_sample(m, m.interior_points(3))
    one = J.Jet.constant(np.ones(s.size), 4, 4)
    assert V.q_critical_residual(s, one, -3.0)[1] < 1e-10
    assert V.q_critical_residual(s, one, 0.0)[1] == pytest.approx(3.0, rel=1e-10)


def test_divergence_form_on_conformal_tt():
    m = M.get_model("torus4-conformal")
    e = np.zeros((4, 4))
    e[0, 3] = e[3, 0] = 1.0
    flat = M.tt_mode_torus(4, [0, 1, 0, 0], e)
    h = M.conformal_tt(m.params["u"], flat, 4) + M.conformal_field(M.trig("sin", [1, 0, 1, 0]))
    s = G.metric_sample(m, m.interior_points(4, seed=6))
    hj = h.on(s)
    np.testing.assert_allclose(V.gamma_divergence_form(s, hj)[0], V.gamma_apply(s, hj), atol=1e-9)


def test_tt_closed_forms_need_einstein_and_tt():
    m, pts, s, hj = _setup("torus4-perturbed", FIELDS["tt+conformal"])
    with pytest.raises(PreconditionError):
        V.db_tt_closed_form(s, hj)
    m, pts, s, hj = _setup("torus4", FIELDS["conformal"])
    with pytest.raises(PreconditionError):
        V.dt_tt_closed_form(s, hj)


def test_flat_tt_closed_forms():
    e = M.standard_tt_polarization(4)
    h = M.tt_mode_torus(4, [1, 0, 0, 0], e)
    m, pts, s, hj = _setup("torus4", h)
    # on flat space -Delta_E h = |k|^2 h, DJ_ring = (Delta^2 h) / 8, DB = -(Delta^2 h) / 4
    np.testing.assert_allclose(V.dj_ring_tt_closed_form(s, hj), hj.value / 8, atol=1e-12)
    np.testing.assert_allclose(V.db_tt_closed_form(s, hj), -hj.value / 4, atol=1e-12)
    np.testing.assert_allclose(V.dt_tt_closed_form(s, hj), 0.0, atol=1e-12)


def test_volume_variations():
    m = M.get_model("sphere4")
    rule = Qd.build_rule(m, 8)
    vol = M.sphere_volume(4)
    g = M.metric_field()
    assert V.dvol_closed_form(m, rule, g) == pytest.approx(2 * vol, rel=1e-12)
    fd2 = V.fd_variation_oracle(m, "Vol", g, rule=rule, eps=1e-2, order=2)
    assert V.d2vol_closed_form(m, rule, g) == pytest.approx(fd2.fd_oracle, rel=1e-8)


@pytest.mark.parametrize("model_id", ["sphere4", "s2xs2", "torus4-perturbed"])
@pytest.mark.parametrize("c", [0.5, 3.0])
def test_functional_scale_invariance(model_id, c):
    m = M.get_model(model_id)
    rule = Qd.build_rule(m, 8)
    a = V.functional_F(m, m, rule)
    b = V.functional_F(m, M.scale(m, c), rule)
    assert b == pytest.approx(a, rel=1e-11, abs=1e-11)


def test_flat_torus_unit_tt_second_variation():
    h = M.tt_mode_torus(4, [1, 0, 0, 0], M.standard_tt_polarization(4, unit=True))
    m = M.get_model("torus4")
    val = V.d2F_closed_form(m, Qd.build_rule(m, 8), tt=h)
    assert val == pytest.approx(-(2 * math.pi) ** 8 / 8, rel=1e-12)


def test_d2F_preconditions():
    m = M.get_model("torus4-perturbed")
    rule = Qd.build_rule(m, 4)
    with pytest.raises(PreconditionError):
        V.d2F_closed_form(m, rule, u=M.trig("sin", [1, 0, 0, 0]))
    flat = M.get_model("torus4")
    with pytest.raises(ArgumentError):
        V.d2F_closed_form(flat, rule)
    with pytest.raises(PreconditionError):
        V.d2F_closed_form(flat, rule, tt=FIELDS["conformal"])
    with pytest.raises(PreconditionError):
        V.einstein_base(m)


@pytest.mark.parametrize("kwargs", [dict(eps=0.0), dict(eps=0.5), dict(order=3),
                                    dict(quantity="Bogus"), dict(points=None),
                                    dict(quantity="Vol")])
def test_oracle_argument_errors(kwargs):
    m = M.get_model("torus4")
    args = dict(quantity="R", points=m.interior_points(2))
    args.update(kwargs)
    q = args.pop("quantity")
    with pytest.raises(ArgumentError):
        V.fd_variation_oracle(m, q, FIELDS["conformal"], **args)


def test_oracle_rejects_vanishing_field():
    m = M.get_model("torus4")
    h = M.conformal_field(M.trig("sin", [1, 0, 0, 0]))
    with pytest.raises(ArgumentError):
        V.fd_variation_oracle(m, "R", h, points=np.zeros((2, 4)))


def test_oracle_rejects_indefinite_metric():
    m = M.get_model("sphere4")
    h = M.constant_tensor(np.eye(4), "I")
    with pytest.raises(DomainError):
        V.fd_variation_oracle(m, "R", h, points=np.array([[0.1, 1.0, 1.0, 1.0]]), eps=0.1)


def test_result_serialises():
    m, pts, s, hj = _setup("torus4-perturbed", FIELDS["conformal"])
    res = V.fd_variation_oracle(m, "R", FIELDS["conformal"], points=pts,
                                closed_form=V.linearized_scalar(s, hj))
    d = json.loads(json.dumps(res.to_dict()))
    assert set(d) == {"closed_form", "fd_oracle", "eps_used", "convergence_order_estimate",
                      "rel_err", "fd_central"}
    assert len(d["fd_oracle"]) == 3


def test_adjointness_on_sphere():
    m = M.get_model("sphere4")
    rule = Qd.build_rule(m, 16)
    # zonal data keep the integrals on one axis
    e = np.zeros((5, 5))
    e[0, 0] = 1.0
    w = M.sphere_polynomial(m, {(0, 0, 0, 0, 0): 0.5, (1, 0, 0, 0, 0): 1.0})
    h = M.sphere_pullback(m, e, weight=w) + M.conformal_field(M.sphere_polynomial(m, {(2, 0, 0, 0, 0): 0.3}))
    f = M.sphere_polynomial(m, {(1, 0, 0, 0, 0): 1.0, (3, 0, 0, 0, 0): 0.4})
    lhs, rhs, rel = V.adjointness_check(m, rule, h, f)
    assert abs(lhs) > 1e-3 and rel < 1e-7
