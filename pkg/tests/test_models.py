import json
import math

import numpy as np
import pytest

from qgeom import models as M
from qgeom.errors import ArgumentError, DomainError, ModelDefinitionError


@pytest.mark.parametrize("model_id", list(M._FIXED))
def test_registry_models_build(model_id):
    m = M.get_model(model_id)
    assert m.name == model_id and m.dim == len(m.axes)
    pts = m.interior_points(5, seed=3)
    assert pts.shape == (5, m.dim)
    for a, (lo, hi) in enumerate(m.chart.bounds):
        assert np.all((pts[:, a] >= lo) & (pts[:, a] <= hi))


def test_list_models_is_json_safe():
    body = json.dumps(M.list_models())
    assert "sphere4" in body and "torus4-conformal" in body


def test_get_model_is_cached():
    assert M.get_model("sphere4") is M.get_model("sphere4")


@pytest.mark.parametrize("bad", ["sphere", "klein-bottle", "torus4-", "counterexample:t=abc"])
def test_unknown_model_id(bad):
    with pytest.raises(ArgumentError):
        M.get_model(bad)


@pytest.mark.parametrize("t", [1.0, -1.0, 1.5])
def test_counterexample_parameter_range(t):
    with pytest.raises(DomainError):
        M.counterexample_family(t)


def test_parametric_ids():
    assert M.get_model("counterexample:t=0.2").params["t"] == 0.2
    assert M.get_model("sphere3:r=2").volume_exact == pytest.approx(8 * M.sphere_volume(3))


@pytest.mark.parametrize("model_id", ["sphere3", "sphere4", "sphere6", "s2xs2", "s2cubed",
                                      "torus4", "counterexample:t=0"])
def test_einstein_certificates(model_id):
    assert M.certify_einstein(M.get_model(model_id)) < 1e-10


def test_certificate_requires_einstein_constant():
    with pytest.raises(ArgumentError):
        M.certify_einstein(M.get_model("torus4-perturbed"))


def test_false_certificate_is_caught():
    from dataclasses import replace

    liar = replace(M.get_model("s2xs2"), einstein_lambda=2.0)
    with pytest.raises(ModelDefinitionError):
        M.certify_einstein(liar)


def test_scale_updates_invariants():
    m = M.scale(M.get_model("sphere4"), 2.0)
    assert m.einstein_lambda == pytest.approx(0.25)
    assert m.volume_exact == pytest.approx(16 * M.sphere_volume(4))
    with pytest.raises(ArgumentError):
        M.scale(m, -1.0)


def test_sphere_volume_values():
    assert M.sphere_volume(2) == pytest.approx(4 * math.pi)
    assert M.sphere_volume(3) == pytest.approx(2 * math.pi ** 2)
    assert M.sphere_volume(4) == pytest.approx(8 * math.pi ** 2 / 3)


@pytest.mark.parametrize("n, k", [(4, [1, 0, 0, 0]), (4, [0, 2, 0, 1]), (5, [1, 0, 0, 0, 0]),
                                  (6, [1, 1, 0, 0, 0, 0])])
def test_tt_modes_are_tt(n, k):
    e = np.zeros((n, n))
    free = [i for i in range(n) if k[i] == 0]
    a, b = free[0], free[1]
    e[a, b] = e[b, a] = 1.0
    h = M.tt_mode_torus(n, k, e)
    out = M.verify_field(M.flat_torus(n), h, M.flat_torus(n).interior_points(4))
    assert out["trace"] < 1e-14 and out["divergence"] < 1e-12


@pytest.mark.parametrize("k, e", [
    ([1, 0, 0, 0], np.diag([1.0, -1.0, 0, 0])),  # not transverse
    ([0, 1, 0, 0], np.diag([1.0, 0, 0, 0])),  # not trace-free
    ([0.5, 0, 0, 0], np.zeros((4, 4))),  # not periodic
    ([1, 0, 0], np.zeros((4, 4))),  # wrong shape
])
def test_tt_mode_validation(k, e):
    with pytest.raises(ArgumentError):
        M.tt_mode_torus(4, k, e)


def test_nonsymmetric_polarization():
    e = np.zeros((4, 4))
    e[1, 2] = 1.0
    with pytest.raises(ArgumentError):
        M.tt_mode_torus(4, [1, 0, 0, 0], e)


def test_verify_field_rejects_false_tt_claim():
    h = M.conformal_field(M.trig("sin", [1, 0, 0, 0]))
    from dataclasses import replace

    fake = replace(h, claimed_tt=True)
    with pytest.raises(ModelDefinitionError):
        M.verify_field(M.flat_torus(4), fake, np.array([[0.3, 0.1, 0.2, 0.4]]))


def test_conformal_tt_is_tt_on_conformal_torus():
    m = M.get_model("torus4-conformal")
    flat = M.tt_mode_torus(4, [1, 0, 0, 0], M.standard_tt_polarization(4))
    h = M.conformal_tt(m.params["u"], flat, 4)
    out = M.verify_field(m, h, m.interior_points(4, seed=9))
    assert out["divergence"] < 1e-12


def test_power_conformal_rejects_dimension_four():
    with pytest.raises(ArgumentError):
        M.power_conformal(M.get_model("sphere4"), M.trig("cos", [1, 0, 0, 0]))


def test_trivial_perturbation_returns_model():
    m = M.get_model("torus4")
    assert M.perturbed(m, M.metric_field(), 0.0) is m
    assert M.conformal_perturb(m, M.trig("sin", [1, 0, 0, 0]), 0.0) is m
