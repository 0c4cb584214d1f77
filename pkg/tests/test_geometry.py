import json

import numpy as np
import pytest

from qgeom import geometry as G
from qgeom import jets as J
from qgeom import models as M
from qgeom.errors import ArgumentError, DomainError, ModelDefinitionError

import oracles

MODELS = ["torus3", "torus4", "sphere3", "sphere4", "sphere5", "s2xs2", "torus4-conformal",
          "torus4-perturbed"]


@pytest.fixture(scope="module", params=MODELS)
def sample(request):
    m = M.get_model(request.param)
    return G.metric_sample(m, m.interior_points(2, seed=11))


def test_christoffel_matches_fd_oracle(sample):
    m = M.get_model(sample.model)
    for i, x in enumerate(sample.points):
        np.testing.assert_allclose(sample.christoffel.value[i], oracles.christoffel(m, x),
                                   atol=1e-9)


def test_scalar_curvature_matches_fd_oracle(sample):
    m = M.get_model(sample.model)
    x = sample.points[0]
    assert sample.scalar.value[0] == pytest.approx(oracles.scalar_curvature(m, x), rel=1e-6,
                                                   abs=1e-6)


def test_riemann_symmetries(sample):
    rm = sample.riemann_low.value
    np.testing.assert_allclose(rm, -rm.transpose(0, 2, 1, 3, 4), atol=1e-10)
    np.testing.assert_allclose(rm, -rm.transpose(0, 1, 2, 4, 3), atol=1e-10)
    np.testing.assert_allclose(rm, rm.transpose(0, 3, 4, 1, 2), atol=1e-10)
    bianchi = rm + rm.transpose(0, 2, 3, 1, 4) + rm.transpose(0, 3, 1, 2, 4)
    assert np.max(np.abs(bianchi)) < 1e-10


@pytest.mark.parametrize("n", [3, 4, 5])
def test_space_form_curvature_sign(n):
    m = M.get_model(f"sphere{n}")
    s = G.metric_sample(m, m.interior_points(1, seed=1))
    g = s.g.value[0]
    expected = np.einsum("il,jk->ijkl", g, g) - np.einsum("ik,jl->ijkl", g, g)
    np.testing.assert_allclose(s.riemann_low.value[0], expected, atol=1e-10)
    np.testing.assert_allclose(s.ricci.value[0], (n - 1) * g, atol=1e-10)


def test_rescaled_sphere_curvature():
    m = M.get_model("sphere4:r=2")
    s = G.metric_sample(m, m.interior_points(1, seed=2))
    assert s.scalar.value[0] == pytest.approx(12 / 4.0, rel=1e-12)


def test_laplacian_of_first_harmonic():
    m = M.get_model("sphere4")
    s = G.metric_sample(m, m.interior_points(3, seed=4))
    x0 = M.sphere_harmonic(m, 0)(J.variables(s.points, 4))
    np.testing.assert_allclose(G.laplacian_scalar(s, x0).value, -4 * x0.value, atol=1e-11)


def test_delta_of_conformal_field_is_minus_gradient():
    m = M.get_model("torus4-perturbed")
    s = G.metric_sample(m, m.interior_points(2, seed=5))
    u = M.trig("sin", [1, 1, 0, 0])
    h = M.conformal_field(u).on(s)
    # delta(u g)_i = -d_i u
    grad = u(J.variables(s.points, 4)).grad().value
    np.testing.assert_allclose(G.delta(s, h).value, -grad, atol=1e-12)


def test_chart_rejects_singular_and_out_of_range_points():
    m = M.get_model("sphere4")
    with pytest.raises(DomainError):
        G.metric_sample(m, [0.0, 1.0, 1.0, 1.0])
    with pytest.raises(DomainError):
        G.metric_sample(m, [1.0, 4.0, 1.0, 1.0])


def test_periodic_coordinates_wrap():
    m = M.get_model("torus3")
    a = G.metric_sample(m, [0.5, 0.5, 0.5])
    b = G.metric_sample(m, [0.5 + 2 * np.pi, 0.5, 0.5])
    np.testing.assert_allclose(a.points, b.points)


def test_point_dimension_checked():
    with pytest.raises(DomainError):
        G.metric_sample(M.get_model("torus4"), [0.1, 0.2])


def test_non_positive_metric_rejected():
    base = M.flat_torus(3)
    bad = M.perturbed(base, M.metric_field(), -2.0)
    with pytest.raises(ModelDefinitionError):
        G.metric_sample(bad, [0.1, 0.2, 0.3])


def test_tensor_value_json_roundtrip():
    m = M.get_model("s2xs2")
    s = G.metric_sample(m, [1.0, 1.0, 1.0, 1.0])
    tv = G.TensorValue.from_jet(s.ricci)
    body = json.loads(tv.to_json([1.0, 1.0, 1.0, 1.0], "s2xs2"))
    assert set(body) == {"variance", "shape", "components", "point", "model"}
    assert body["shape"] == [4, 4] and body["variance"] == ["down", "down"]
    assert tv.symmetric_defect() < 1e-14


def test_tensor_value_rejects_bad_variance():
    with pytest.raises(ArgumentError):
        G.TensorValue(("sideways",), np.zeros(3))
