"""Chart-based tensor calculus on jets.

Every tensor field is a :class:`~qgeom.jets.Jet` whose leading axis is a
batch of chart points followed by tensor axes of length ``n``; indices are
covariant (lowered) unless a function says otherwise.  Jet degree is the
number of derivatives still available: the metric enters at degree 4,
Christoffel symbols have degree 3, curvature degree 2.  Operators check the
degree they need instead of truncating silently.

Conventions
-----------
* ``R(X, Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z``,
  ``R_ijkl = g(R(d_i, d_j) d_k, d_l)``, so the round sphere has
  ``R_ijkl = K (g_il g_jk - g_ik g_jl)``.
* ``R_jk = g^il R_ijkl`` and ``Delta = g^ij nabla_i nabla_j`` (non-positive).
* ``(delta h)_i = -nabla^j h_ij``; ``delta^2 h = nabla^i nabla^j h_ij``.
* ``(Rm . h)_jk = R_ijkl h^il`` and ``Delta_E h = Delta h + 2 Rm . h``.
* Covariant derivatives put the differentiation index first:
  ``nabla(h)[..., k, i, j] = nabla_k h_ij``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, DomainError, ModelDefinitionError
from .jets import Jet, exp, jeinsum, variables

_LETTERS = "abcdefgh"


@dataclass(frozen=True)
class Chart:
    """Coordinate box of a single-chart model.

    ``singular_axes`` lists coordinates whose interval endpoints are chart
    degeneracies (polar angles of a sphere); points must stay at least
    ``singular_locus_margin`` away from them.
    """

    dim: int
    bounds: tuple
    periodic: tuple
    singular_axes: tuple = ()
    singular_locus_margin: float = 1e-3

    def __post_init__(self):
        if self.dim < 3:
            raise ArgumentError(f"charts of dimension {self.dim} < 3 are not supported")
        if len(self.bounds) != self.dim or len(self.periodic) != self.dim:
            raise ArgumentError("bounds/periodic must have one entry per coordinate")
        if any(not lo < hi for lo, hi in self.bounds):
            raise ArgumentError("empty coordinate interval")
        if not self.singular_locus_margin > 0:
            raise ArgumentError("singular locus margin must be positive")

    def validate(self, points) -> np.ndarray:
        """Return points with periodic coordinates wrapped; raise DomainError otherwise."""
        pts = np.array(points, dtype=float)
        if pts.shape[-1] != self.dim:
            raise DomainError(f"expected {self.dim} coordinates, got {pts.shape[-1]}")
        if not np.isfinite(pts).all():
            raise DomainError("non-finite chart coordinates")
        for a, ((lo, hi), per) in enumerate(zip(self.bounds, self.periodic)):
            x = pts[..., a]
            if per:
                pts[..., a] = lo + np.mod(x - lo, hi - lo)
                continue
            if np.any(x < lo) or np.any(x > hi):
                raise DomainError(f"coordinate {a} outside [{lo}, {hi}]")
            if a in self.singular_axes:
                gap = np.minimum(x - lo, hi - x)
                if np.any(gap < self.singular_locus_margin):
                    raise DomainError(
                        f"coordinate {a} within {self.singular_locus_margin} of the chart singularity")
        return pts


@dataclass(frozen=True)
class TensorValue:
    """Tensor components at one or more points with explicit index variance."""

    variance: tuple
    components: np.ndarray

    def __post_init__(self):
        if any(v not in ("up", "down") for v in self.variance):
            raise ArgumentError(f"variance entries must be 'up' or 'down': {self.variance}")

    @classmethod
    def from_jet(cls, jet: Jet, variance=None) -> "TensorValue":
        comps = np.asarray(jet.value)
        rank = comps.ndim - 1
        variance = tuple(variance) if variance is not None else ("down",) * rank
        if len(variance) != rank:
            raise ArgumentError("variance length does not match tensor rank")
        return cls(variance, comps)

    @property
    def rank(self) -> int:
        return len(self.variance)

    def symmetric_defect(self) -> float:
        c = self.components
        return float(np.max(np.abs(c - np.swapaxes(c, -1, -2)))) if self.rank >= 2 else 0.0

    def to_json(self, point=None, model: str | None = None) -> str:
        c = np.asarray(self.components)
        shape = list(c.shape[c.ndim - self.rank:]) if self.rank else []
        body = {"variance": list(self.variance), "shape": shape,
                "components": c.reshape(-1).tolist(), "point": None if point is None
                else np.asarray(point, dtype=float).tolist(), "model": model}
        return json.dumps(body)


@dataclass(frozen=True)
class MetricSample:
    """Metric, inverse and curvature jets at a batch of chart points."""

    model: str
    points: np.ndarray
    dim: int
    g: Jet
    g_inv: Jet
    vol_density: Jet
    christoffel: Jet | None = None
    riemann_low: Jet | None = None
    ricci: Jet | None = None
    scalar: Jet | None = None
    single: bool = field(default=False, compare=False)
    # memo for quantities derived from this sample; never changes observable values
    cache: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    def out(self, arr):
        """Drop the batch axis for samples built from a single point."""
        arr = np.asarray(arr)
        return arr[0] if self.single else arr

    def need_curvature(self):
        if self.riemann_low is None:
            raise ArgumentError("metric sample was built without curvature jets")


def _matrix_series(g: Jet):
    """Inverse and sqrt(det) of a jet-valued SPD matrix by nilpotent series."""
    g0 = g.value
    g0_inv = np.linalg.inv(g0)
    deg = g.degree
    n = g0.shape[-1]
    eye = np.broadcast_to(np.eye(n), g0.shape)
    _, logdet0 = np.linalg.slogdet(g0)
    if deg == 0:
        return Jet.constant(g0_inv, g.dim, 0), Jet.constant(np.exp(0.5 * logdet0), g.dim, 0)
    m = jeinsum("...ik,...kj->...ij", g0_inv, g - g0)
    inv = Jet.constant(eye, g.dim, deg)
    logdet = Jet.constant(logdet0, g.dim, deg)
    power = m
    for k in range(1, deg + 1):
        sign = -1.0 if k % 2 else 1.0
        inv = inv + sign * power
        logdet = logdet - sign * jeinsum("...ii->...", power) / k
        if k < deg:
            power = jeinsum("...ik,...kj->...ij", power, m)
    inv = jeinsum("...ik,...kj->...ij", inv, g0_inv)
    return inv, exp(0.5 * logdet)


def metric_sample(model, points, degree: int = 4) -> MetricSample:
    """Evaluate a model's metric and curvature jets at chart points.

    Parameters
    ----------
    model : ModelManifold
        Anything with ``name``, ``dim``, ``chart`` and ``metric_jets(X)``.
    points : array_like, shape (n,) or (N, n)
    degree : int
        Jet degree of the metric.  Curvature is built when ``degree >= 2``.
    """
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    pts = model.chart.validate(np.atleast_2d(pts))
    n = model.dim
    X = variables(pts, degree)
    g = model.metric_jets(X)
    if g.shape != (pts.shape[0], n, n):
        raise ModelDefinitionError(f"metric has shape {g.shape}, expected {(pts.shape[0], n, n)}")
    g0 = g.value
    if not np.allclose(g0, np.swapaxes(g0, -1, -2), rtol=0, atol=1e-13 * max(1.0, np.abs(g0).max())):
        raise ModelDefinitionError("metric is not symmetric")
    try:
        np.linalg.cholesky(g0)
    except np.linalg.LinAlgError:
        raise ModelDefinitionError(f"metric of {model.name} is not positive definite") from None
    g_inv, vol = _matrix_series(g)
    extra = {}
    if degree >= 2:
        extra = _curvature(g, g_inv)
    return MetricSample(model.name, pts, n, g, g_inv, vol, single=single, **extra)


def _curvature(g: Jet, g_inv: Jet) -> dict:
    dg = g.grad()  # dg[..., i, j, k] = d_k g_ij
    # first kind, lowered on the first slot: G[l, i, j] = (d_i g_jl + d_j g_il - d_l g_ij) / 2
    d_i_gjl = jeinsum("...jli->...lij", dg)
    d_j_gil = jeinsum("...ilj->...lij", dg)
    d_l_gij = jeinsum("...ijl->...lij", dg)
    low = 0.5 * (d_i_gjl + d_j_gil - d_l_gij)
    gamma = jeinsum("...kl,...lij->...kij", g_inv, low)  # Gamma^k_ij, degree 3
    dgamma = gamma.grad()  # [..., m, j, k, i] = d_i Gamma^m_jk
    g2 = gamma.truncate(gamma.degree - 1)
    d_i = jeinsum("...mjki->...mijk", dgamma)
    gg = jeinsum("...mip,...pjk->...mijk", g2, g2)
    mixed = d_i - d_i.swap(-3, -2) + gg - gg.swap(-3, -2)  # R^m_ijk
    riem = jeinsum("...lm,...mijk->...ijkl", g, mixed)
    ric = jeinsum("...il,...ijkl->...jk", g_inv, riem)
    scal = jeinsum("...jk,...jk->...", g_inv, ric)
    return {"christoffel": gamma, "riemann_low": riem, "ricci": ric, "scalar": scal}


# --- algebra -------------------------------------------------------------


def raise2(sample: MetricSample, h: Jet) -> Jet:
    """``h^ij = g^ia g^jb h_ab``."""
    t = jeinsum("...ia,...ab->...ib", sample.g_inv, h)
    return jeinsum("...ib,...jb->...ij", t, sample.g_inv)


def trace(sample: MetricSample, h: Jet) -> Jet:
    return jeinsum("...ij,...ij->...", sample.g_inv, h)


def dot(sample: MetricSample, h: Jet, k: Jet) -> Jet:
    """``h . k = h^ij k_ij``."""
    return jeinsum("...ij,...ij->...", raise2(sample, h), k)


def cross(sample: MetricSample, h: Jet, k: Jet) -> Jet:
    """``(h x k)_ij = g^kl h_ik k_jl``."""
    t = jeinsum("...ik,...kl->...il", h, sample.g_inv)
    return jeinsum("...il,...jl->...ij", t, k)


def norm2(sample: MetricSample, t: Jet) -> Jet:
    """Full tensor norm squared of a covariant tensor of any rank."""
    rank = len(t.shape) - 1
    up = t
    for s in range(rank):
        idx = _LETTERS[:rank]
        src = idx[:s] + "q" + idx[s + 1:]
        up = jeinsum(f"...{idx[s]}q,...{src}->...{idx}", sample.g_inv, up)
    idx = _LETTERS[:rank]
    return jeinsum(f"...{idx},...{idx}->...", up, t)


def rm_dot(sample: MetricSample, h: Jet) -> Jet:
    """``(Rm . h)_jk = R_ijkl h^il``."""
    sample.need_curvature()
    return jeinsum("...ijkl,...il->...jk", sample.riemann_low, raise2(sample, h))


def one_form_to_vector(sample: MetricSample, w: Jet) -> Jet:
    return jeinsum("...ij,...j->...i", sample.g_inv, w)


def pair(sample: MetricSample, a: Jet, b: Jet) -> Jet:
    """Inner product ``g^ij a_i b_j`` of two 1-forms."""
    return jeinsum("...i,...i->...", one_form_to_vector(sample, a), b)


# --- covariant derivatives -------------------------------------------------


def covariant_derivative(sample: MetricSample, t: Jet) -> Jet:
    """``nabla t`` for a covariant tensor, differentiation index first."""
    sample.need_curvature()
    rank = len(t.shape) - 1
    t.require(1, "covariant derivative")
    idx = _LETTERS[:rank]
    out = jeinsum(f"...{idx}p->...p{idx}", t.grad())
    gamma = sample.christoffel
    for s in range(rank):
        src = idx[:s] + "q" + idx[s + 1:]
        out = out - jeinsum(f"...qp{idx[s]},...{src}->...p{idx}", gamma, t)
    return out


def second_covariant_derivative(sample: MetricSample, t: Jet) -> Jet:
    """``nabla nabla t`` with ``[..., a, b, ...] = nabla_a nabla_b t``."""
    t.require(2, "second covariant derivative")
    return covariant_derivative(sample, covariant_derivative(sample, t))


def covariant_derivative_tensor2(sample: MetricSample, h: Jet) -> Jet:
    if len(h.shape) != 3:
        raise ArgumentError("expected a symmetric 2-tensor field")
    return covariant_derivative(sample, h)


def rough_laplacian(sample: MetricSample, t: Jet) -> Jet:
    rank = len(t.shape) - 1
    idx = _LETTERS[2:2 + rank]
    return jeinsum(f"...ab,...ab{idx}->...{idx}", sample.g_inv,
                   second_covariant_derivative(sample, t))


def hessian_scalar(sample: MetricSample, f: Jet) -> Jet:
    """``(nabla^2 f)_ij = d_i d_j f - Gamma^k_ij d_k f``."""
    if len(f.shape) != 1:
        raise ArgumentError("expected a scalar field")
    return second_covariant_derivative(sample, f)


def laplacian_scalar(sample: MetricSample, f: Jet) -> Jet:
    return trace(sample, hessian_scalar(sample, f))


def einstein_operator(sample: MetricSample, h: Jet) -> Jet:
    """``Delta_E h = Delta h + 2 Rm . h``."""
    h.require(2, "Einstein operator")
    return rough_laplacian(sample, h) + 2.0 * rm_dot(sample, h)


def divergence(sample: MetricSample, w: Jet) -> Jet:
    """``div w = nabla^i w_i`` of a 1-form."""
    return jeinsum("...ij,...ij->...", sample.g_inv, covariant_derivative(sample, w))


def delta(sample: MetricSample, h: Jet) -> Jet:
    """``(delta h)_i = -nabla^j h_ij`` for a symmetric 2-tensor."""
    nh = covariant_derivative(sample, h)
    return -jeinsum("...kj,...kij->...i", sample.g_inv, nh)


def delta2(sample: MetricSample, h: Jet) -> Jet:
    """``delta^2 h = nabla^i nabla^j h_ij``."""
    return -divergence(sample, delta(sample, h))


def sym(t: Jet) -> Jet:
    return 0.5 * (t + t.swap(-1, -2))


def divergence_ops(sample: MetricSample, h: Jet) -> dict:
    """``delta h`` and, when the degree allows, ``delta^2 h``."""
    out = {"delta": delta(sample, h)}
    if h.degree >= 2:
        out["delta2"] = delta2(sample, h)
    return out
