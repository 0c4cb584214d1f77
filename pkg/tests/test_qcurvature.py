import numpy as np
import pytest

from qgeom import geometry as G
from qgeom import jets as J
from qgeom import models as M
from qgeom import qcurvature as QC
from qgeom.errors import ArgumentError, DomainError

import oracles


def _sample(model_id, count=3, seed=0):
    m = M.get_model(model_id)
    return G.metric_sample(m, m.interior_points(count, seed=seed))


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_round_sphere_q(n):
    q = QC.q_curvature(_sample(f"sphere{n}"))
    np.testing.assert_allclose(q, oracles.sphere_q(n), rtol=1e-10)


@pytest.mark.parametrize("n, r", [(3, 2.0), (4, 0.5), (5, 1.5)])
def test_q_scales_like_inverse_fourth_power(n, r):
    q = QC.q_curvature(_sample(f"sphere{n}:r={r}"))
    np.testing.assert_allclose(q, oracles.sphere_q(n) / r ** 4, rtol=1e-10)


@pytest.mark.parametrize("model_id, q", [("s2xs2", 2.0 / 3.0), ("torus4", 0.0),
                                         ("s2cubed", 0.96)])
def test_product_and_flat_values(model_id, q):
    np.testing.assert_allclose(QC.q_curvature(_sample(model_id)), q, rtol=1e-10, atol=1e-12)


@pytest.mark.parametrize("t", [0.0, 0.15, -0.25])
def test_counterexample_q(t):
    s = _sample(f"counterexample:t={t}")
    np.testing.assert_allclose(QC.q_curvature(s), oracles.family_q(t), rtol=1e-10)


@pytest.mark.parametrize("model_id", ["sphere4", "s2xs2", "torus4-perturbed", "torus4-conformal"])
def test_dim4_form_agrees(model_id):
    s = _sample(model_id)
    np.testing.assert_allclose(QC.q_curvature(s, "dim4"), QC.q_curvature(s), atol=1e-11)


def test_weyl_norm_on_s2xs2():
    np.testing.assert_allclose(QC.weyl_norm2(_sample("s2xs2")), 16.0 / 3.0, rtol=1e-10)


@pytest.mark.parametrize("model_id", ["sphere3", "sphere4", "torus4-conformal"])
def test_conformally_flat_weyl_vanishes(model_id):
    assert np.max(np.abs(QC.schouten_weyl(_sample(model_id))["W"])) < 1e-10


def test_paneitz_on_first_harmonics():
    s = _sample("sphere4")
    for a in range(5):
        u = M.sphere_harmonic(M.get_model("sphere4"), a)
        x = u(J.variables(s.points, 4)).value
        np.testing.assert_allclose(QC.paneitz_apply(s, u), 24 * x, atol=1e-9)


@pytest.mark.parametrize("model_id", ["torus4-perturbed", "counterexample:t=0.2"])
@pytest.mark.parametrize("kind", ["bach", "t"])
def test_dual_forms_agree(model_id, kind):
    s = _sample(model_id)
    fn = QC.bach if kind == "bach" else QC.t_tensor
    a, b = fn(s, "definitional"), fn(s, "scalar_E_form")
    assert np.max(np.abs(a)) > 1e-4
    np.testing.assert_allclose(a, b, atol=1e-9)


def test_j_ring_forms_agree_and_trace_j_is_q():
    s = _sample("torus4-perturbed")
    j, ring = QC.j_tensor(s)
    _, ring2 = QC.j_tensor(s, "schouten_form")
    np.testing.assert_allclose(ring, ring2, atol=1e-9)
    tr = np.einsum("...ij,...ij->...", s.g_inv.value, j)
    np.testing.assert_allclose(tr, QC.q_curvature(s), atol=1e-10)


@pytest.mark.parametrize("model_id", ["sphere4", "s2xs2", "s2cubed"])
def test_dual_tensors_vanish_on_einstein(model_id):
    s = _sample(model_id)
    for arr in (QC.bach(s), QC.t_tensor(s), QC.j_tensor(s)[1]):
        assert np.max(np.abs(arr)) < 1e-9


def test_l_factorization_on_sphere():
    s = _sample("sphere4")
    u = M.sphere_polynomial(M.get_model("sphere4"), {(2, 0, 0, 0, 0): 1.0, (0, 1, 1, 0, 0): 0.5})
    np.testing.assert_allclose(QC.script_l_apply(s, u), QC.script_l_factored(s, u, 1.0), atol=1e-8)


@pytest.mark.parametrize("form", ["elvish", ""])
def test_unknown_form(form):
    s = _sample("torus4")
    with pytest.raises(ArgumentError):
        QC.q_curvature(s, form)
    with pytest.raises(ArgumentError):
        QC.bach(s, form)


def test_u_must_be_jet_or_field():
    with pytest.raises(ArgumentError):
        QC.paneitz_apply(_sample("torus4"), 3.0)


def test_conformal_law_on_torus():
    residual = QC.conformal_q_check(M.get_model("torus4"), M.trig("sin", [1, 1, 0, 0], 0.0, 0.3),
                                    M.get_model("torus4").interior_points(3))
    assert np.max(residual) < 1e-9


def test_conformal_law_needs_positive_factor():
    m = M.get_model("torus5")
    with pytest.raises(DomainError):
        QC.conformal_q_check(m, M.trig("cos", [1, 0, 0, 0, 0]), np.array([[np.pi, 0, 0, 0, 0]]))
