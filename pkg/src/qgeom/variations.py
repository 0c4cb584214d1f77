"""Linearisations, adjoints and second variations, with finite-difference oracles.

Closed forms act on jets at a metric sample.  The oracles perturb the
metric itself, ``g + eps h``, rebuild every jet from scratch and difference
the resulting quantity, so they share no code with the closed forms beyond
the curvature primitives.

Readings of the displayed formulas that the notation leaves open:

* ``dR . w`` is the 1-form pairing ``g^ij d_i R w_j``.
* ``Ric . nabla(delta h)`` is the full contraction ``R^jk nabla_j (delta h)_k``.
* ``nabla(f dR)`` and ``nabla delta(f Ric)`` enter the adjoint through their
  symmetric parts, so the adjoint is a symmetric 2-tensor.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import geometry as G
from .errors import ArgumentError, DomainError, ModelDefinitionError, PreconditionError
from .jets import Jet, jeinsum, variables
from .models import (ModelManifold, ScalarField, TensorField, certify_einstein, perturbed,
                     trace_decompose)
from .qcurvature import pack, sc
from .quadrature import QuadratureRule, integrate_scalar, map_points, volume


@dataclass
class VariationResult:
    """Closed form against a finite-difference oracle."""

    closed_form: object
    fd_oracle: object
    eps_used: float
    convergence_order_estimate: float
    rel_err: float
    fd_central: object = None

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("closed_form", "fd_oracle", "fd_central"):
            d[k] = np.asarray(d[k]).tolist()
        return d


def rel_error(closed, fd) -> float:
    closed, fd = np.asarray(closed, dtype=float), np.asarray(fd, dtype=float)
    return float(np.max(np.abs(closed - fd)) / max(1.0, float(np.max(np.abs(closed)))))


# --- first variations of curvature ---------------------------------------------


def _sym_nabla(sample, w: Jet) -> Jet:
    return G.sym(G.covariant_derivative(sample, w))


def linearized_ricci_jet(sample: G.MetricSample, h: Jet) -> Jet:
    """``-1/2 [Delta_E h - (Ric x h + h x Ric) + nabla^2 tr h + 2 sym nabla(delta h)]``."""
    h.require(2, "linearized Ricci")
    ric = sample.ricci
    out = G.einstein_operator(sample, h)
    out = out - G.cross(sample, ric, h) - G.cross(sample, h, ric)
    out = out + G.hessian_scalar(sample, G.trace(sample, h))
    out = out + 2.0 * _sym_nabla(sample, G.delta(sample, h))
    return -0.5 * out


def linearized_scalar_jet(sample: G.MetricSample, h: Jet) -> Jet:
    """``-Delta tr h + delta^2 h - Ric . h``."""
    h.require(2, "linearized scalar curvature")
    return (-G.laplacian_scalar(sample, G.trace(sample, h)) + G.delta2(sample, h)
            - G.dot(sample, sample.ricci, h))


def linearized_ricci(sample, h: Jet):
    return sample.out(linearized_ricci_jet(sample, h).value)


def linearized_scalar(sample, h: Jet):
    return sample.out(linearized_scalar_jet(sample, h).value)


def _full(sample, a: Jet, b: Jet) -> Jet:
    """Full contraction of covariant tensors of equal rank, indices raised on ``a``."""
    rank = len(a.shape) - 1
    idx = "abcdefgh"[:rank]
    up = a
    for s in range(rank):
        src = idx[:s] + "q" + idx[s + 1:]
        up = jeinsum(f"...{idx[s]}q,...{src}->...{idx}", sample.g_inv, up)
    return jeinsum(f"...{idx},...{idx}->...", up, b)


def gamma_jet(sample: G.MetricSample, h: Jet) -> Jet:
    """Linearisation of Q in the direction ``h`` (needs degree-4 jets)."""
    h.require(4, "linearized Q")
    p = pack(sample)
    k = p.k
    s = sample
    trh = G.trace(s, h)
    dh = G.delta(s, h)
    lap = lambda f: G.laplacian_scalar(s, f)  # noqa: E731
    ric_h = G.dot(s, p.ric, h)
    dR = p.R.grad()
    a_block = (-lap(lap(trh)) + lap(G.delta2(s, h)) - lap(ric_h)
               + 0.5 * G.pair(s, dR, trh.grad() + 2.0 * dh) - _full(s, p.hess_R, h))
    b_block = (_full(s, p.ric, G.einstein_operator(s, h)) + _full(s, p.ric, G.hessian_scalar(s, trh))
               + 2.0 * _full(s, p.ric, G.covariant_derivative(s, dh)))
    c_block = 2.0 * p.R * (-lap(trh) + G.delta2(s, h) - ric_h)
    return k.A * a_block - k.B * b_block + k.C * c_block


def gamma_adjoint_jet(sample: G.MetricSample, f: Jet) -> Jet:
    """Formal adjoint of the linearised Q applied to a function ``f``."""
    f.require(4, "adjoint of linearized Q")
    p = pack(sample)
    k, s, g = p.k, sample, sample.g
    lap = lambda u: G.laplacian_scalar(s, u)  # noqa: E731
    lap_f = lap(f)
    f_dR = p.R.grad() * f[..., None]
    a_block = (G.hessian_scalar(s, lap_f) - g * sc(lap(lap_f)) - p.ric * sc(lap_f)
               + 0.5 * g * sc(-G.divergence(s, f_dR)) + _sym_nabla(s, f_dR)
               - p.hess_R * sc(f))
    f_ric = p.ric * sc(f)
    b_block = (G.rough_laplacian(s, f_ric) + 2.0 * G.rm_dot(s, p.ric) * sc(f)
               + g * sc(G.delta2(s, f_ric)) + 2.0 * _sym_nabla(s, G.delta(s, f_ric)))
    f_R = f * p.R
    c_block = g * sc(lap(f_R)) - G.hessian_scalar(s, f_R) + p.ric * sc(f_R)
    return k.A * a_block - k.B * b_block - 2.0 * k.C * c_block


def gamma_apply(sample, h: Jet):
    return sample.out(gamma_jet(sample, h).value)


def gamma_adjoint_apply(sample, f: Jet):
    return sample.out(gamma_adjoint_jet(sample, f).value)


def u_vector(sample: G.MetricSample, h_ring: Jet) -> Jet:
    """The 1-form ``U(h_ring)`` of the divergence form of the linearised Q."""
    p = pack(sample)
    n, s0 = p.n, p.s_ring
    grad_pair = G.dot(sample, s0, h_ring).grad()
    # h_ij nabla_k S0^ij = h^ij (nabla_k S0)_ij
    h_up = G.raise2(sample, h_ring)
    h_grad_s = jeinsum("...ij,...kij->...k", h_up, G.covariant_derivative(sample, s0))
    h_dtr = jeinsum("...kj,...j->...k", h_ring, G.one_form_to_vector(sample, p.tr_s.grad()))
    return (n * n * grad_pair - 8.0 * (n - 1) * h_grad_s
            + (n * n + 4.0 * n - 8) * h_dtr) / (2.0 * (n - 1) * (n - 2))


def gamma_divergence_form_jet(sample: G.MetricSample, h: Jet):
    """``div U(h_ring) - 2 J_ring . h_ring + L(tr h) / n``; valid for TT plus pure-trace ``h``."""
    h.require(4, "divergence form of linearized Q")
    p = pack(sample)
    ring, trh = trace_decompose(sample, h)
    U = u_vector(sample, ring)
    value = (G.divergence(sample, U) - 2.0 * G.dot(sample, p.j_ring_definitional, ring)
             + p.script_l(trh) / p.n)
    return value, U


def gamma_divergence_form(sample, h: Jet):
    value, U = gamma_divergence_form_jet(sample, h)
    return sample.out(value.value), sample.out(U.value)


# --- Einstein / TT closed forms -----------------------------------------------------


def _require_einstein_tt(sample: G.MetricSample, h: Jet, tol: float = 1e-9):
    p = pack(sample)
    resid = float(np.max(np.abs(p.s_ring.value)))
    if resid > tol:
        raise PreconditionError(f"base metric is not Einstein at the sample (|S0| = {resid:.2e})")
    tr = float(np.max(np.abs(G.trace(sample, h).value)))
    div = float(np.max(np.abs(G.delta(sample, h).value)))
    if tr > tol or div > tol:
        raise PreconditionError(f"direction is not TT (|tr| = {tr:.2e}, |delta| = {div:.2e})")
    h.require(4, "closed-form TT variation")


def db_tt_closed_form(sample, h: Jet):
    _require_einstein_tt(sample, h)
    n, R = sample.dim, sample.scalar.value[..., None, None]
    y = -G.einstein_operator(sample, h)
    out = -(-G.einstein_operator(sample, y).value + (n - 2) / (n * (n - 1)) * R * y.value) / (2.0 * (n - 2))
    return sample.out(out)


def dt_tt_closed_form(sample, h: Jet):
    _require_einstein_tt(sample, h)
    n, R = sample.dim, sample.scalar.value[..., None, None]
    return sample.out((n * n + 2 * n - 4) / (4.0 * n * (n - 1)) * R * G.einstein_operator(sample, h).value)


def dj_ring_tt_closed_form(sample, h: Jet):
    _require_einstein_tt(sample, h)
    n, R = sample.dim, sample.scalar.value[..., None, None]
    y = -G.einstein_operator(sample, h)
    shift = (n - 2) ** 3 * (n + 2) / (8.0 * n * (n - 1) ** 2)
    return sample.out((-G.einstein_operator(sample, y).value + shift * R * y.value) / (2.0 * (n - 2) ** 2))


def q_critical_residual(sample, f: Jet, kappa: float):
    """``(Gamma* f - kappa g, norm)``; the norm is the largest eigenvalue modulus of
    ``g^-1 (Gamma* f - kappa g)`` over the sample points."""
    resid = gamma_adjoint_jet(sample, f).value - kappa * sample.g.value
    mixed = np.einsum("...ik,...kj->...ij", sample.g_inv.value, resid)
    norm = float(np.max(np.abs(np.linalg.eigvals(mixed)))) if mixed.size else 0.0
    return sample.out(resid), norm


# --- finite-difference oracles ---------------------------------------------------------

_POINTWISE = {
    "Q": lambda s: pack(s).q.value,
    "R": lambda s: s.scalar.value,
    "Ric": lambda s: s.ricci.value,
    "B": lambda s: pack(s).bach_definitional.value,
    "T": lambda s: pack(s).t_definitional.value,
    "J_ring": lambda s: pack(s).j_ring_definitional.value,
}
QUANTITIES = tuple(_POINTWISE) + ("Vol", "F")


def _field_sup(model: ModelManifold, h: TensorField, points) -> float:
    s = G.metric_sample(model, points, 0)
    return float(np.max(np.abs(h.evaluate(variables(s.points, 0), s.g).value)))


def _quantity_fn(model, quantity, points, rule, depends_on):
    if quantity in _POINTWISE:
        if points is None:
            raise ArgumentError(f"{quantity} is pointwise; give points")
        fn = _POINTWISE[quantity]
        return lambda m: map_points(m, points, fn, 4)
    if rule is None:
        raise ArgumentError(f"{quantity} is an integral; give a quadrature rule")
    if quantity == "Vol":
        return lambda m: volume(m, rule, base=model)
    if quantity == "F":
        return lambda m: functional_F(model, m, rule, depends_on=depends_on)
    raise ArgumentError(f"unknown quantity {quantity!r}; choose from {QUANTITIES}")


def _check_spd(model, h, eps, points):
    s = G.metric_sample(model, points, 0)
    hv = h.evaluate(variables(s.points, 0), s.g).value
    for e in (eps, -eps):
        if np.min(np.linalg.eigvalsh(s.g.value + e * hv)) <= 0:
            raise DomainError(f"g + ({e:g}) h leaves the positive-definite cone")


def fd_variation_oracle(model: ModelManifold, quantity: str, h: TensorField, *, points=None,
                        rule: QuadratureRule | None = None, eps: float = 1e-3, order: int = 1,
                        closed_form=None, depends_on=None) -> VariationResult:
    """Central-difference derivative of ``quantity(g + eps h)`` at ``eps = 0``.

    ``eps`` is normalised by the sup norm of ``h``.  First derivatives use
    the 3-point stencil, second derivatives the 5-point stencil.  The stencil
    is repeated at ``eps / 2`` and ``eps / 4``: the three values give the
    convergence order estimate (NaN when the differences are at rounding
    level), and the first two a Richardson-extrapolated ``fd_oracle``.  The
    plain stencil value at ``eps`` is kept as ``fd_central``.
    """
    if not 0 < eps <= 0.1:
        raise ArgumentError("eps must lie in (0, 0.1]")
    if order not in (1, 2):
        raise ArgumentError("order must be 1 or 2")
    if points is None and rule is None:
        raise ArgumentError("give evaluation points or a quadrature rule")
    if depends_on is None and quantity not in _POINTWISE:
        depends_on = field_axes(model, h)
    probe = points if points is not None else rule.reduced(
        depends_on if depends_on is not None else model.metric_depends_on or (0,))[0]
    sup = _field_sup(model, h, probe)
    if sup == 0:
        raise ArgumentError("perturbation vanishes at the evaluation points")
    step = eps / sup
    _check_spd(model, h, 2 * step if order == 2 else step, probe)
    q = _quantity_fn(model, quantity, points, rule, depends_on)
    memo = {}

    def at(e):
        if e not in memo:
            memo[e] = np.asarray(q(perturbed(model, h, e)), dtype=float)
        return memo[e]

    def stencil(e):
        if order == 1:
            return (at(e) - at(-e)) / (2 * e)
        return (-at(2 * e) + 16 * at(e) - 30 * at(0.0) + 16 * at(-e) - at(-2 * e)) / (12 * e * e)

    d1, d2, d4 = stencil(step), stencil(step / 2), stencil(step / 4)
    num, den = np.max(np.abs(d1 - d2)), np.max(np.abs(d2 - d4))
    # below this the sweep differences are rounding noise and carry no order information
    floor = 1e3 * np.finfo(float).eps * max(1.0, float(np.max(np.abs(at(step))))) / step ** order
    p = float(math.log2(num / den)) if min(num, den) > floor else float("nan")
    # one Richardson step on the leading error term: eps^2 (3-point) or eps^4 (5-point)
    r = 4.0 if order == 1 else 16.0
    fd = (r * d2 - d1) / (r - 1.0)
    fd = fd if np.ndim(fd) else float(fd)
    rel = rel_error(closed_form, fd) if closed_form is not None else float("nan")
    raw = d1 if np.ndim(d1) else float(d1)
    return VariationResult(closed_form, fd, step, p, rel, raw)


# --- integrals: volume, F, Rayleigh quotients ---------------------------------------------


def field_axes(model: ModelManifold, *fields) -> tuple:
    """Coordinates an integrand built from ``model`` and ``fields`` can vary along."""
    if model.homogeneous and all(f.invariant_axes is not None for f in fields):
        axes = set()
        for f in fields:
            axes |= set(f.invariant_axes)
        return tuple(sorted(axes))
    axes = set(model.metric_depends_on)
    for f in fields:
        axes |= set(f.depends_on)
    return tuple(sorted(axes))


def dvol_closed_form(model, rule, h: TensorField, depends_on=None) -> float:
    fld = lambda s: G.trace(s, h.on(s)).value  # noqa: E731
    return 0.5 * integrate_scalar(model, rule, fld, depends_on=depends_on or field_axes(model, h),
                                  degree=0)


def d2vol_closed_form(model, rule, h: TensorField, depends_on=None) -> float:
    def fld(s):
        hj = h.on(s)
        return G.trace(s, hj).value ** 2 - 2.0 * G.dot(s, hj, hj).value

    return 0.25 * integrate_scalar(model, rule, fld, depends_on=depends_on or field_axes(model, h),
                                   degree=0)


def functional_F(base: ModelManifold, g_model: ModelManifold, rule: QuadratureRule,
                 depends_on=None) -> float:
    """``Vol(g)^(4/n) * int Q(g) dv_base`` with the base volume form frozen."""
    n = base.dim
    if depends_on is None:
        # Q and the density ratios are constant on homogeneous models on a shared chart
        homogeneous = base.homogeneous and g_model.homogeneous and base.axes == g_model.axes
        depends_on = () if homogeneous else g_model.metric_depends_on
    pts, w = rule.reduced(depends_on)
    ref = base.reference_density(pts)
    q = map_points(g_model, pts, lambda s: pack(s).q.value, 4)
    vol_base = map_points(base, pts, lambda s: s.vol_density.value, 0)
    vol_g = map_points(g_model, pts, lambda s: s.vol_density.value, 0)
    total_q = float(np.sum(w * q * vol_base / ref))
    vol = float(np.sum(w * vol_g / ref))
    return vol ** (4.0 / n) * total_q


def d2F_fd(base: ModelManifold, rule: QuadratureRule, h: TensorField, eps: float = 1e-2,
           depends_on=None) -> VariationResult:
    axes = field_axes(base, h) if depends_on is None else depends_on
    return fd_variation_oracle(base, "F", h, rule=rule, eps=eps, order=2, depends_on=axes)


def _script_l_values(sample, u: Jet):
    return pack(sample).script_l(u).value


def d2F_closed_form(base: ModelManifold, rule: QuadratureRule, tt: TensorField | None = None,
                    u: ScalarField | None = None, depends_on=None) -> float:
    """Second variation of F at an Einstein base along ``h = tt + u g``.

    ``-2 Vol^(4/n) [int <tt, DJ_ring tt> + (n+4)/(4n^2) int phi L(phi)]`` with
    ``phi = n u - mean(n u)``.
    """
    if not base.is_einstein:
        raise PreconditionError(f"{base.name} is not an Einstein model")
    if tt is None and u is None:
        raise ArgumentError("give a TT part, a conformal part, or both")
    if tt is not None and not tt.claimed_tt:
        raise PreconditionError(f"{tt.name} is not declared TT")
    n = base.dim
    fields = [f for f in (tt, u) if f is not None]
    axes = field_axes(base, *fields) if depends_on is None else depends_on
    vol = volume(base, rule)
    total = 0.0
    if tt is not None:
        def tt_term(s):
            hj = tt.on(s)
            return G.dot(s, hj, _as_jet(dj_ring_tt_closed_form(s, hj), s)).value

        total += integrate_scalar(base, rule, tt_term, depends_on=axes)
    if u is not None:
        mean = integrate_scalar(base, rule, u, depends_on=axes) / vol

        def conf_term(s):
            phi = u(variables(s.points, 4)) * n - n * mean
            return phi.value * _script_l_values(s, phi)

        total += (n + 4) / (4.0 * n * n) * integrate_scalar(base, rule, conf_term, depends_on=axes)
    return -2.0 * vol ** (4.0 / n) * total


def _as_jet(values, sample) -> Jet:
    v = np.asarray(values)
    if sample.single:
        v = v[None]
    return Jet.constant(v, sample.g.dim, 0)


def rayleigh_einstein(model: ModelManifold, rule: QuadratureRule, h: TensorField,
                      depends_on=None) -> float:
    """``int <h, -Delta_E h> / int |h|^2`` over the rule."""
    axes = field_axes(model, h) if depends_on is None else depends_on

    def num(s):
        hj = h.on(s)
        return G.dot(s, hj, -G.einstein_operator(s, hj)).value

    def den(s):
        hj = h.on(s).truncate(0)
        return G.dot(s, hj, hj).value

    d = integrate_scalar(model, rule, den, depends_on=axes, degree=0)
    if d == 0:
        raise ArgumentError("Rayleigh quotient of the zero tensor")
    return integrate_scalar(model, rule, num, depends_on=axes) / d


def adjointness_check(model: ModelManifold, rule: QuadratureRule, h: TensorField, f: ScalarField,
                      depends_on=None):
    """``(int f Gamma h, int <h, Gamma* f>, relative difference)``."""
    axes = field_axes(model, h, f) if depends_on is None else depends_on

    def lhs_fn(s):
        return f(variables(s.points, 4)).value * gamma_jet(s, h.on(s)).value

    def rhs_fn(s):
        return G.dot(s, h.on(s).truncate(0), gamma_adjoint_jet(s, f(variables(s.points, 4)))).value

    lhs = integrate_scalar(model, rule, lhs_fn, depends_on=axes)
    rhs = integrate_scalar(model, rule, rhs_fn, depends_on=axes)
    return lhs, rhs, abs(lhs - rhs) / max(1.0, abs(lhs), abs(rhs))


def einstein_base(model: ModelManifold) -> ModelManifold:
    """Return the model after re-checking its Einstein certificate."""
    try:
        certify_einstein(model)
    except (ArgumentError, ModelDefinitionError) as exc:
        raise PreconditionError(str(exc)) from None
    return model

