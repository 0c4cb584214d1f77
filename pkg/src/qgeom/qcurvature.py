"""Q-curvature, its companion tensors and the Paneitz operator.

All quantities are built pointwise from a :class:`MetricSample`.  The Bach
tensor, the T-tensor and the traceless J-tensor each have two independent
code paths (Schouten-based and scalar/traceless-Ricci based) so that each
serves as an oracle for the other.

Notation: ``S`` Schouten, ``S0`` its traceless part, ``trS = R / (2(n-1))``,
``E = Ric - R g / n``, ``A x B`` the product ``A_i^k B_kj`` and ``A.B`` the
full contraction.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import geometry as G
from .errors import ArgumentError, DomainError
from .jets import Jet, jeinsum, variables
from .models import ModelManifold, ScalarField, conformal_perturb, power_conformal


@dataclass(frozen=True)
class Coefficients:
    """Dimension-dependent constants of the Q-curvature and Paneitz operator."""

    n: int

    @property
    def A(self):
        return -1.0 / (2 * (self.n - 1))

    @property
    def B(self):
        return -2.0 / (self.n - 2) ** 2

    @property
    def C(self):
        n = self.n
        return (n * n * (n - 4) + 16 * (n - 1)) / (8 * (n - 1) ** 2 * (n - 2) ** 2)

    @property
    def a(self):
        n = self.n
        return ((n - 2) ** 2 + 4) / (2 * (n - 1) * (n - 2))

    @property
    def b(self):
        return -4.0 / (self.n - 2)


def sc(f: Jet) -> Jet:
    """Scalar field jet broadcast against 2-tensors."""
    return f[..., None, None]


def kulkarni_nomizu(a: Jet, b: Jet) -> Jet:
    """``(a o b)_ijkl = a_il b_jk + a_jk b_il - a_ik b_jl - a_jl b_ik``."""
    return (jeinsum("...il,...jk->...ijkl", a, b) + jeinsum("...jk,...il->...ijkl", a, b)
            - jeinsum("...ik,...jl->...ijkl", a, b) - jeinsum("...jl,...ik->...ijkl", a, b))


class CurvaturePack:
    """Lazily evaluated curvature zoo of one metric sample (jets, batch-first)."""

    def __init__(self, sample: G.MetricSample):
        sample.need_curvature()
        self.s = sample
        self.n = sample.dim
        self.k = Coefficients(self.n)

    # basic tensors ----------------------------------------------------------
    @property
    def g(self) -> Jet:
        return self.s.g

    @property
    def ric(self) -> Jet:
        return self.s.ricci

    @property
    def R(self) -> Jet:
        return self.s.scalar

    @property
    def rm(self) -> Jet:
        return self.s.riemann_low

    @cached_property
    def tr_s(self) -> Jet:
        return self.R / (2.0 * (self.n - 1))

    @cached_property
    def schouten(self) -> Jet:
        return (self.ric - self.g * sc(self.tr_s)) / (self.n - 2.0)

    @cached_property
    def s_ring(self) -> Jet:
        return self.schouten - self.g * sc(self.tr_s / self.n)

    @cached_property
    def E(self) -> Jet:
        return self.ric - self.g * sc(self.R / self.n)

    @cached_property
    def weyl(self) -> Jet:
        return self.rm - kulkarni_nomizu(self.schouten, self.g)

    @cached_property
    def lap_R(self) -> Jet:
        return G.laplacian_scalar(self.s, self.R)

    @cached_property
    def hess_R(self) -> Jet:
        return G.hessian_scalar(self.s, self.R)

    @cached_property
    def ric_norm2(self) -> Jet:
        return G.dot(self.s, self.ric, self.ric)

    # Q ------------------------------------------------------------------------
    @cached_property
    def q(self) -> Jet:
        k = self.k
        return k.A * self.lap_R + k.B * self.ric_norm2 + k.C * self.R * self.R

    @cached_property
    def q4(self) -> Jet:
        """Four-dimensional closed form, valid only for ``n = 4``."""
        if self.n != 4:
            raise ArgumentError("the four-dimensional Q formula needs n = 4")
        return -self.lap_R / 6.0 - 0.5 * self.ric_norm2 + self.R * self.R / 6.0

    # Bach ---------------------------------------------------------------------
    def _trace_free_hessian(self, f: Jet) -> Jet:
        hess = G.hessian_scalar(self.s, f)
        return hess - self.g * sc(G.trace(self.s, hess) / self.n)

    @cached_property
    def bach_definitional(self) -> Jet:
        n, s0 = self.n, self.s_ring
        out = G.einstein_operator(self.s, s0) - self._trace_free_hessian(self.tr_s)
        out = out - (n - 4.0) * G.cross(self.s, s0, s0)
        out = out - self.g * sc(G.dot(self.s, s0, s0))
        return out - s0 * sc(self.tr_s * (2.0 * (n - 2) / n))

    @cached_property
    def bach_scalar_e(self) -> Jet:
        n, e = self.n, self.E
        out = G.einstein_operator(self.s, e) / (n - 2.0)
        out = out - self._trace_free_hessian(self.R) / (2.0 * (n - 1))
        out = out - G.cross(self.s, e, e) * ((n - 4.0) / (n - 2) ** 2)
        out = out - self.g * sc(G.dot(self.s, e, e) / (n - 2.0) ** 2)
        return out - e * sc(self.R / (n * (n - 1.0)))

    # T ------------------------------------------------------------------------
    @cached_property
    def t_definitional(self) -> Jet:
        n, s0 = self.n, self.s_ring
        out = (n - 2.0) * self._trace_free_hessian(self.tr_s)
        sq = G.cross(self.s, s0, s0)
        out = out + 4.0 * (n - 1) * (sq - self.g * sc(G.dot(self.s, s0, s0) / n))
        return out - s0 * sc(self.tr_s * ((n - 2.0) * (n * n + 2 * n - 4) / n))

    @cached_property
    def t_scalar_e(self) -> Jet:
        n, e = self.n, self.E
        out = self._trace_free_hessian(self.R) * ((n - 2.0) / (2 * (n - 1)))
        sq = G.cross(self.s, e, e)
        out = out + (sq - self.g * sc(G.dot(self.s, e, e) / n)) * (4.0 * (n - 1) / (n - 2) ** 2)
        return out - e * sc(self.R * ((n * n + 2 * n - 4) / (2.0 * n * (n - 1))))

    # J ------------------------------------------------------------------------
    @cached_property
    def j(self) -> Jet:
        n = self.n
        return (self.g * sc(self.q / n) - self.bach_definitional / (n - 2.0)
                - self.t_definitional * ((n - 4.0) / (4 * (n - 1) * (n - 2))))

    @cached_property
    def j_ring_definitional(self) -> Jet:
        return self.j - self.g * sc(G.trace(self.s, self.j) / self.n)

    @cached_property
    def j_ring_schouten(self) -> Jet:
        n, s0 = self.n, self.s_ring
        inner = G.einstein_operator(self.s, s0)
        inner = inner + self._trace_free_hessian(self.tr_s) * ((n * n - 10 * n + 12) / (4.0 * (n - 1)))
        out = -inner / (n - 2.0) + self.g * sc(G.dot(self.s, s0, s0) * (2.0 / n))
        return out + s0 * sc(self.tr_s * ((n - 2.0) ** 2 * (n + 2) / (4 * n * (n - 1))))

    # operators ------------------------------------------------------------------
    def paneitz(self, u: Jet) -> Jet:
        """``P u = Delta^2 u - div((a R g + b Ric)(du)) + (n-4)/2 Q u``."""
        u.require(4, "Paneitz operator")
        k, s = self.k, self.s
        lap2 = G.laplacian_scalar(s, G.laplacian_scalar(s, u))
        du = u.grad()
        flux = du * (k.a * self.R)[..., None] + k.b * jeinsum(
            "...ij,...j->...i", self.ric, G.one_form_to_vector(s, du))
        return lap2 - G.divergence(s, flux) + ((self.n - 4) / 2.0) * self.q * u

    def script_l(self, u: Jet) -> Jet:
        """``1/2 (P - (n+4)/2 Q) u``."""
        return 0.5 * (self.paneitz(u) - ((self.n + 4) / 2.0) * self.q * u)


def pack(sample: G.MetricSample) -> CurvaturePack:
    """Curvature pack memoised on the sample."""
    if "pack" not in sample.cache:
        sample.cache["pack"] = CurvaturePack(sample)
    return sample.cache["pack"]


def _out(sample, jet: Jet):
    return sample.out(jet.value)


# --- public operations ----------------------------------------------------------


def q_curvature(sample: G.MetricSample, form: str = "general"):
    """Q at the sample points; ``form="dim4"`` uses the four-dimensional closed form."""
    p = pack(sample)
    if form == "general":
        return _out(sample, p.q)
    if form == "dim4":
        return _out(sample, p.q4)
    raise ArgumentError(f"unknown Q form {form!r}")


def schouten_weyl(sample: G.MetricSample) -> dict:
    p = pack(sample)
    return {"S": _out(sample, p.schouten), "S_ring": _out(sample, p.s_ring),
            "tr_S": _out(sample, p.tr_s), "W": _out(sample, p.weyl), "E": _out(sample, p.E)}


def weyl_norm2(sample: G.MetricSample):
    p = pack(sample)
    return _out(sample, G.norm2(sample, p.weyl))


_FORMS = {
    "bach": {"definitional": "bach_definitional", "scalar_E_form": "bach_scalar_e"},
    "t": {"definitional": "t_definitional", "scalar_E_form": "t_scalar_e"},
    "j_ring": {"definitional": "j_ring_definitional", "schouten_form": "j_ring_schouten"},
}


def _form(kind: str, form: str) -> str:
    try:
        return _FORMS[kind][form]
    except KeyError:
        raise ArgumentError(f"unknown form {form!r} for {kind}; use one of "
                            f"{sorted(_FORMS[kind])}") from None


def bach(sample: G.MetricSample, form: str = "definitional"):
    return _out(sample, getattr(pack(sample), _form("bach", form)))


def t_tensor(sample: G.MetricSample, form: str = "definitional"):
    return _out(sample, getattr(pack(sample), _form("t", form)))


def j_tensor(sample: G.MetricSample, form: str = "definitional"):
    """``(J, J_ring)``; with ``schouten_form`` the traceless part comes from its own path."""
    p = pack(sample)
    return _out(sample, p.j), _out(sample, getattr(p, _form("j_ring", form)))


def _u_jet(sample: G.MetricSample, u) -> Jet:
    if isinstance(u, ScalarField):
        return u(variables(sample.points, sample.g.degree))
    if not isinstance(u, Jet):
        raise ArgumentError("expected a scalar jet or ScalarField")
    return u


def paneitz_apply(sample: G.MetricSample, u):
    return _out(sample, pack(sample).paneitz(_u_jet(sample, u)))


def script_l_apply(sample: G.MetricSample, u):
    return _out(sample, pack(sample).script_l(_u_jet(sample, u)))


def script_l_factored(sample: G.MetricSample, u, lam: float):
    """Einstein factorisation ``1/2 (-Delta + (n-2)(n+2) lam / 2)(-Delta - n lam) u``."""
    n = sample.dim
    uj = _u_jet(sample, u)
    v = -G.laplacian_scalar(sample, uj) - n * lam * uj
    out = 0.5 * (-G.laplacian_scalar(sample, v) + ((n - 2) * (n + 2) / 2.0) * lam * v)
    return _out(sample, out)


def conformal_q_check(base: ModelManifold, u_field: ScalarField, points):
    """Relative residual of the conformal transformation law of Q.

    For ``n = 4`` the conformal metric is ``exp(2u) g`` and the law is
    ``Q_hat = exp(-4u)(P u + Q)``; otherwise ``u_field`` is the positive
    factor ``w`` of ``w^(4/(n-4)) g`` and ``Q_hat = 2/(n-4) w^(-(n+4)/(n-4)) P w``.
    Both sides come from separate metric samples.
    """
    n = base.dim
    s = G.metric_sample(base, points, 4)
    u = _u_jet(s, u_field)
    p = pack(s)
    if n == 4:
        hat = conformal_perturb(base, u_field)
        rhs = np.exp(-4.0 * u.value) * (p.paneitz(u).value + p.q.value)
    else:
        if np.any(u.value <= 0):
            raise DomainError("conformal factor w must be positive")
        hat = power_conformal(base, u_field)
        rhs = (2.0 / (n - 4)) * u.value ** (-(n + 4) / (n - 4)) * p.paneitz(u).value
    q_hat = pack(G.metric_sample(hat, points, 4)).q.value
    return s.out(np.abs(q_hat - rhs) / np.maximum(1.0, np.abs(q_hat)))
