"""Registered verification checks.

Importing this module fills the registry in :mod:`qgeom.report`; the order
of registration is the order of every report.  Perturbation baskets are
drawn from generators seeded by the run seed and the basket name, so the
same configuration always yields the same fields.
"""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from . import geometry as G
from . import jets as J
from . import models as M
from . import quadrature as Qd
from . import variations as V
from .qcurvature import (bach, conformal_q_check, j_tensor, pack, script_l_apply,
                         script_l_factored, t_tensor)
from .report import PLUMBING, q_formula, register, vol_ratio_formula

TWO_PI = 2.0 * math.pi

# --- helpers ------------------------------------------------------------------------------


def _model(ctx, model_id):
    return ctx.memo(("model", model_id), lambda: M.get_model(model_id))


def _points(ctx, model_id, count, salt=""):
    m = _model(ctx, model_id)
    seed = int(ctx.rng(f"points-{model_id}-{salt}").integers(2 ** 31))
    return m.interior_points(count, seed=seed)


def _sample(ctx, model_id, count=3, salt="", degree=4):
    key = ("sample", model_id, count, salt, degree)
    return ctx.memo(key, lambda: G.metric_sample(_model(ctx, model_id),
                                                 _points(ctx, model_id, count, salt), degree))


def _rule(ctx, model_id, default):
    res = ctx.res(default)
    return ctx.memo(("rule", model_id, res), lambda: Qd.build_rule(_model(ctx, model_id), res))


def _disc(a, b) -> float:
    """``max |a - b|`` relative to ``max(1, max |b|)``."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b)) / max(1.0, float(np.max(np.abs(b)))))


def _maxabs(a) -> float:
    return float(np.max(np.abs(np.asarray(a, dtype=float))))


def _ratio_form(computed, reference):
    """Relative criteria on references below one are reported as ``computed / reference``."""
    if 0 < abs(reference) < 1:
        return computed / reference, 1.0
    return computed, reference


def _one():
    return M.ScalarField(lambda X: X[0] * 0.0 + 1.0, "1", (), invariant_axes=())


def _rand_sym(rng, n, scale):
    a = rng.normal(size=(n, n))
    return scale * (a + a.T) / 2.0


def _trig_tensor(A, k, kind, phase, name):
    u = M.trig(kind, k, phase)
    A = np.asarray(A, dtype=float)
    return M.TensorField(lambda X, g: J.Jet.constant(A, X[0].dim, X[0].degree) * u(X)[..., None, None],
                         name, u.depends_on, invariant_axes=u.depends_on)


_WAVES = ((1, 0), (0, 1), (1, 1), (1, -1), (2, 1), (1, 2))


def _wave(rng, n):
    k = np.zeros(n)
    k[:2] = _WAVES[int(rng.integers(len(_WAVES)))]
    return k


def torus_basket(ctx, n=4, count=5):
    """Generic symmetric fields ``A sin(k.x + p) + B cos(l.x)`` varying along the first two axes."""

    def build():
        rng = ctx.rng(f"torus-basket-{n}")
        out = []
        for i in range(count):
            A, B = _rand_sym(rng, n, 0.15), _rand_sym(rng, n, 0.15)
            k, l = _wave(rng, n), _wave(rng, n)
            h = (_trig_tensor(A, k, "sin", float(rng.uniform(0, TWO_PI)), "a")
                 + _trig_tensor(B, l, "cos", 0.0, "b"))
            out.append(replace(h, name=f"mix{i}"))
        return out

    return ctx.memo(("torus-basket", n, count), build)


def torus_scalars(ctx, n=4, count=5):
    def build():
        rng = ctx.rng(f"torus-scalars-{n}")
        return [replace(M.trig(("sin", "cos")[i % 2], _wave(rng, n), float(rng.uniform(0, TWO_PI))),
                        name=f"trig{i}") for i in range(count)]

    return ctx.memo(("torus-scalars", n, count), build)


def _poly(model, coeffs, name):
    """Polynomial in the first ambient coordinate, ``coeffs`` maps degree to coefficient."""
    return M.sphere_polynomial(model, {(d,): c for d, c in coeffs.items()}, name=name)


def sphere_basket(ctx, model_id, nonzonal=2):
    """Five zonal fields (usable in reduced integrals) followed by random pullbacks."""

    def build():
        m = _model(ctx, model_id)
        rng = ctx.rng(f"sphere-basket-{model_id}")
        c = rng.uniform(0.2, 0.6, size=8)
        k = m.dim
        E = np.zeros((k + 1, k + 1))
        E[0, 0] = 1.0
        x = lambda coeffs, name: _poly(m, coeffs, name)  # noqa: E731
        zonal = [
            M.conformal_field(x({1: c[0], 2: c[1]}, "p0")),
            M.sphere_pullback(m, c[2] * E, name="dx0dx0"),
            M.sphere_pullback(m, c[3] * E, weight=x({0: 0.5, 1: 1.0}, "w"), name="w*dx0dx0"),
            M.conformal_field(x({3: c[4], 1: -c[5]}, "p1")) + M.sphere_pullback(m, c[6] * E),
            M.sphere_pullback(m, E, weight=x({0: 0.1, 2: c[7]}, "w2"))
            + M.conformal_field(x({2: 0.2}, "p2")),
        ]
        zonal = [replace(h, name=f"zonal{i}") for i, h in enumerate(zonal)]
        extra = [M.sphere_pullback(m, _rand_sym(rng, k + 1, 0.3), name=f"pullback{i}")
                 for i in range(nonzonal)]
        return zonal + extra

    return ctx.memo(("sphere-basket", model_id, nonzonal), build)


def sphere_scalars(ctx, model_id, count=5):
    def build():
        m = _model(ctx, model_id)
        rng = ctx.rng(f"sphere-scalars-{model_id}")
        out = []
        for i in range(count):
            c = rng.uniform(-1.0, 1.0, size=3)
            out.append(_poly(m, {1: c[0], 2: c[1], 3: c[2]}, f"zpoly{i}"))
        return out

    return ctx.memo(("sphere-scalars", model_id, count), build)


def basket(ctx, model_id):
    return sphere_basket(ctx, model_id) if model_id.startswith("sphere") else torus_basket(ctx)


def zonal_basket(ctx, model_id):
    """The part of the basket whose integrals reduce to few axes."""
    return basket(ctx, model_id)[:5]


def scalars(ctx, model_id):
    return sphere_scalars(ctx, model_id) if model_id.startswith("sphere") else torus_scalars(ctx)


def _probe_field(ctx, model_id):
    """One generic symmetric field suited to the chart of the model."""
    m = _model(ctx, model_id)
    rng = ctx.rng(f"probe-{model_id}")
    if m.kind == "sphere":
        return M.sphere_pullback(m, _rand_sym(rng, m.dim + 1, 0.3), name="probe")
    if m.kind == "product":
        h = None
        for f, k in enumerate(m.params["dims"]):
            p = M.sphere_pullback(m, _rand_sym(rng, k + 1, 0.3), factor=f)
            h = p if h is None else h + p
        return replace(h, name="probe")
    k = np.zeros(m.dim)
    k[:2] = (1, 1)
    return replace(_trig_tensor(_rand_sym(rng, m.dim, 0.2), k, "sin", 0.3, "probe")
                   + _trig_tensor(_rand_sym(rng, m.dim, 0.2), np.eye(m.dim)[0], "cos", 0.0, "q"),
                   name="probe")


REGISTRY_MODELS = ("torus3", "torus4", "torus5", "torus6", "sphere3", "sphere4", "sphere5",
                   "sphere6", "s2xs2", "s2cubed", "torus4-conformal", "torus4-perturbed")
EINSTEIN_MODELS = ("torus4", "torus6", "sphere3", "sphere4", "sphere5", "sphere6", "s2xs2",
                   "s2cubed")
NON_EINSTEIN = ("torus4-perturbed", "torus4-conformal", "counterexample:t=0.2")
BASKET_MODELS = ("torus4", "sphere3", "sphere4", "torus4-perturbed")


# --- jets -------------------------------------------------------------------------------


def _fd_weights(order, accuracy):
    r = (order + accuracy - 1) // 2
    offs = np.arange(-r, r + 1, dtype=float)
    A = np.vander(offs, increasing=True).T
    b = np.zeros(len(offs))
    b[order] = math.factorial(order)
    return offs, np.linalg.solve(A, b)


def _probe_function(X):
    """Closed-form test function on three variables; works on jets and arrays."""
    if isinstance(X[0], J.Jet):
        return (J.exp(J.sin(X[0]) * X[1] * 0.3) + J.cos(X[2]) * X[0] * X[0]
                + J.sqrt(X[1] * X[2] + 2.0))
    return np.exp(0.3 * np.sin(X[0]) * X[1]) + np.cos(X[2]) * X[0] ** 2 + np.sqrt(X[1] * X[2] + 2.0)


def _jets_fd(ctx):
    rng = ctx.rng("jets-fd")
    p = rng.uniform(-0.5, 0.5, size=3)
    jet = _probe_function(J.variables(p[None], 4))
    h = 0.05
    worst = 0.0
    for alpha in J.multi_indices(3, 4):
        stencils = [_fd_weights(a, 6) if a else (np.zeros(1), np.ones(1)) for a in alpha]
        grids = np.meshgrid(*[s[0] for s in stencils], indexing="ij")
        wts = np.einsum("i,j,k->ijk", *[s[1] for s in stencils])
        X = [p[i] + h * grids[i] for i in range(3)]
        fd = float(np.sum(wts * _probe_function(X))) / h ** sum(alpha)
        worst = max(worst, abs(float(J.extract_partial(jet, alpha)[0]) - fd) / max(1.0, abs(fd)))
    return worst, 0.0


def _random_jets(ctx, count=4):
    rng = ctx.rng("jets-algebra")
    n = J.num_coefficients(3, 4)
    out = [J.Jet(rng.normal(size=(5, n)), 3, 4) for _ in range(count)]
    out[-1] = out[-1] + 3.0
    return out


def _jets_algebra(ctx):
    a, b, c, d = _random_jets(ctx)
    devs = [(a + b).c - (b + a).c, ((a + b) + c).c - (a + (b + c)).c,
            (a * b).c - (b * a).c, ((a * b) * c).c - (a * (b * c)).c,
            (a * (b + c)).c - (a * b + a * c).c, ((a * d) / d).c - a.c]
    return max(_maxabs(x) for x in devs), 0.0


def _jets_truncation(ctx):
    p = ctx.rng("jets-trunc").uniform(-0.5, 0.5, size=(4, 3))
    hi = _probe_function(J.variables(p, 4)).truncate(2)
    lo = _probe_function(J.variables(p, 2))
    return _maxabs(hi.c - lo.c), 0.0


register("jets/fd-partials", "jets", PLUMBING, "TRIVIAL", 1e-6, _jets_fd)
register("jets/algebra-laws", "jets", PLUMBING, "TRIVIAL", 1e-12, _jets_algebra)
register("jets/truncation", "jets", PLUMBING, "TRIVIAL", 1e-15, _jets_truncation)


# --- geometry ---------------------------------------------------------------------------


def _riemann_sym(model_id):
    def fn(ctx):
        rm = _sample(ctx, model_id, 2).riemann_low.value
        sw = lambda *ax: np.transpose(rm, (0,) + tuple(a + 1 for a in ax))  # noqa: E731
        devs = [rm + sw(1, 0, 2, 3), rm + sw(0, 1, 3, 2), rm - sw(2, 3, 0, 1),
                rm + sw(1, 2, 0, 3) + sw(2, 0, 1, 3)]
        return max(_maxabs(d) for d in devs), 0.0

    return fn


def _contracted_bianchi(model_id):
    def fn(ctx):
        s = _sample(ctx, model_id, 2)
        g = s.g.truncate(2)
        ein = s.ricci - g * (s.scalar * 0.5)[..., None, None]
        d = G.covariant_derivative(s, ein)
        div = J.jeinsum("...aj,...ajk->...k", s.g_inv.truncate(1), d)
        return _maxabs(div.value), 0.0

    return fn


def _einstein_trace(model_id):
    def fn(ctx):
        s = _sample(ctx, model_id, 2)
        hj = _probe_field(ctx, model_id).on(s)
        lhs = G.trace(s, G.einstein_operator(s, hj)).value
        rhs = (G.laplacian_scalar(s, G.trace(s, hj)).value
               + 2.0 * G.dot(s, s.ricci, hj.truncate(2)).value)
        return _disc(lhs, rhs), 0.0

    return fn


def _einstein_condition(model_id):
    def fn(ctx):
        s = _sample(ctx, model_id, 2)
        res = s.ricci.value - s.scalar.value[..., None, None] / s.dim * s.g.value
        return _maxabs(res), 0.0

    return fn


for _mid in REGISTRY_MODELS:
    register(f"geometry/{_mid}/riemann-symmetries", "geometry", PLUMBING, "TRIVIAL", 1e-10,
             _riemann_sym(_mid))
    register(f"geometry/{_mid}/contracted-bianchi", "geometry", PLUMBING, "TRIVIAL", 1e-8,
             _contracted_bianchi(_mid))
    register(f"geometry/{_mid}/einstein-operator-trace", "geometry", PLUMBING, "DERIVED", 1e-10,
             _einstein_trace(_mid))
for _mid in EINSTEIN_MODELS:
    register(f"geometry/{_mid}/einstein", "geometry", PLUMBING, "TRIVIAL", 1e-10,
             _einstein_condition(_mid))


# --- models -----------------------------------------------------------------------------


def _certificate(model_id):
    def fn(ctx):
        return M.certify_einstein(_model(ctx, model_id)), 0.0

    return fn


for _mid in EINSTEIN_MODELS + ("counterexample:t=0",):
    register(f"models/{_mid}/einstein-certificate", "models", PLUMBING, "TRIVIAL", 1e-10,
             _certificate(_mid))


# --- round spheres ----------------------------------------------------------------------


def _sphere_q(n):
    def fn(ctx):
        q = pack(_sample(ctx, f"sphere{n}", 3)).q.value
        return q.tolist(), [n * (n - 2) * (n + 2) / 8.0] * len(q)

    return fn


for _n in (3, 4, 5, 6):
    register(f"sphere/sphere{_n}/Q", "sphere", "Q of the round sphere", "PAPER", 1e-10,
             _sphere_q(_n))


# --- counterexample family --------------------------------------------------------------

FAMILY_T = (0.0, 0.1, 0.2, 0.3)


def _family_q_nodes(ctx, t):
    def build():
        model = _model(ctx, f"counterexample:t={t:g}")
        return pack(G.metric_sample(model, M.certificate_nodes(model, 4), 4)).q.value

    return ctx.memo(("family-q", t), build)


def _family_vol_ratio(ctx, t):
    def build():
        rule = _rule(ctx, "s2cubed", 12)
        base = _model(ctx, "s2cubed")
        return Qd.volume(_model(ctx, f"counterexample:t={t:g}"), rule, base) / Qd.volume(base, rule)

    return ctx.memo(("family-vol", t), build)


def _family_check(t, what):
    def fn(ctx):
        if what == "Q":
            return _ratio_form(float(np.mean(_family_q_nodes(ctx, t))), q_formula(t))
        if what == "vol":
            return _family_vol_ratio(ctx, t), vol_ratio_formula(t)
        if what == "spread":
            q = _family_q_nodes(ctx, t)
            return float(np.max(q) - np.min(q)), 0.0
        q = float(np.min(_family_q_nodes(ctx, t)))
        return max(0.0, 24.0 / 25.0 - q) + max(0.0, 1.0 - _family_vol_ratio(ctx, t)), 0.0

    return fn


_ANCHOR_FAMILY = "product counterexample family"
for _t in FAMILY_T:
    register(f"counterexample/t={_t:g}/Q", "counterexample", _ANCHOR_FAMILY, "PAPER", 1e-9,
             _family_check(_t, "Q"))
    register(f"counterexample/t={_t:g}/vol-ratio", "counterexample", _ANCHOR_FAMILY, "PAPER", 1e-9,
             _family_check(_t, "vol"))
for _t in FAMILY_T:
    register(f"counterexample-shape/t={_t:g}/Q-spread", "counterexample-shape", _ANCHOR_FAMILY,
             "DERIVED", 1e-10, _family_check(_t, "spread"))
for _t in FAMILY_T[1:]:
    register(f"counterexample-shape/t={_t:g}/Q-and-volume-exceed-base", "counterexample-shape",
             _ANCHOR_FAMILY, "PAPER", 0.0, _family_check(_t, "ineq"))


# --- Gauss-Bonnet-Chern -----------------------------------------------------------------


def _gbc_integrand(s):
    p = pack(s)
    return p.q.value + 0.25 * G.norm2(s, p.weyl).value


def _gbc(model_id, reference):
    def fn(ctx):
        m = _model(ctx, model_id)
        total = Qd.integrate_scalar(m, _rule(ctx, model_id, 8), _gbc_integrand,
                                    depends_on=m.metric_depends_on)
        return total, reference

    return fn


_ANCHOR_GBC = "Gauss-Bonnet-Chern integral"
register("gbc/sphere4", "gbc", _ANCHOR_GBC, "DERIVED", 1e-8, _gbc("sphere4", 16 * math.pi ** 2))
register("gbc/s2xs2", "gbc", _ANCHOR_GBC, "DERIVED", 1e-8, _gbc("s2xs2", 32 * math.pi ** 2))


# --- conformal covariance ---------------------------------------------------------------


def _conformal(model_id, u):
    def fn(ctx):
        m = _model(ctx, model_id)
        return _maxabs(conformal_q_check(m, u, _points(ctx, model_id, 4, "conf"))), 0.0

    return fn


_CONF_FIELDS = {"0.1sin(x1)": M.trig("sin", [1, 0, 0, 0], amplitude=0.1),
                "0.05cos(x2)": M.trig("cos", [0, 1, 0, 0], amplitude=0.05)}
_ANCHOR_CONF = "conformal transformation law of Q"
for _mid in ("torus4", "sphere4"):
    for _name, _u in _CONF_FIELDS.items():
        register(f"conformal/{_mid}/u={_name}", "conformal", _ANCHOR_CONF, "PAPER", 1e-8,
                 _conformal(_mid, _u))
_W6 = M.ScalarField(lambda X: J.sin(X[0]) * 0.1 + 1.0, "1+0.1sin(x1)", (0,))
register("conformal/torus6/w=1+0.1sin(x1)", "conformal", _ANCHOR_CONF, "PAPER", 1e-8,
         _conformal("torus6", _W6))


# --- linearizations ---------------------------------------------------------------------


def _linearization(ctx, model_id, i, quantity):
    def build():
        m = _model(ctx, model_id)
        h = basket(ctx, model_id)[i]
        s = _sample(ctx, model_id, 3, "lin")
        hj = h.on(s)
        closed = {"Q": V.gamma_apply, "Ric": V.linearized_ricci, "R": V.linearized_scalar}[quantity]
        return V.fd_variation_oracle(m, quantity, h, points=s.points, eps=ctx.eps(1e-3),
                                     closed_form=closed(s, hj))

    return ctx.memo(("lin", model_id, i, quantity), build)


def _lin_check(model_id, i, quantity, what):
    def fn(ctx):
        r = _linearization(ctx, model_id, i, quantity)
        return (r.rel_err, 0.0) if what == "rel" else (r.convergence_order_estimate, 2.0)

    return fn


_ANCHOR_LIN = "linearized Q, Ricci and scalar curvature"
for _mid in BASKET_MODELS:
    for _i in range(7 if _mid.startswith("sphere") else 5):
        for _q in ("Q", "Ric", "R"):
            register(f"linearization/{_mid}/h{_i}/{_q}/rel-err", "linearization", _ANCHOR_LIN,
                     "PAPER", 1e-5, _lin_check(_mid, _i, _q, "rel"))
            register(f"linearization/{_mid}/h{_i}/{_q}/order", "linearization", _ANCHOR_LIN,
                     "DERIVED", 0.1, _lin_check(_mid, _i, _q, "order"))


# --- adjoint ----------------------------------------------------------------------------


def _adjoint_pair(model_id, i):
    def fn(ctx):
        m = _model(ctx, model_id)
        h, f = zonal_basket(ctx, model_id)[i], scalars(ctx, model_id)[i]
        return V.adjointness_check(m, _rule(ctx, model_id, 16), h, f)[2], 0.0

    return fn


def _gamma_star_one(model_id):
    def fn(ctx):
        s = _sample(ctx, model_id, 3, "adj")
        one = _one()(J.variables(s.points, 4))
        return _maxabs(V.gamma_adjoint_apply(s, one) + 2.0 * pack(s).j.value), 0.0

    return fn


def _trace_gamma_star(model_id, i):
    def fn(ctx):
        s = _sample(ctx, model_id, 3, "adj")
        f = scalars(ctx, model_id)[i](J.variables(s.points, 4))
        tr = G.trace(s, V.gamma_adjoint_jet(s, f)).value
        return _maxabs(tr - script_l_apply(s, f)), 0.0

    return fn


_ANCHOR_ADJ = "formal adjoint of the linearized Q"
for _mid in BASKET_MODELS:
    for _i in range(5):
        register(f"adjoint/{_mid}/pair{_i}", "adjoint", _ANCHOR_ADJ, "PAPER", 1e-7,
                 _adjoint_pair(_mid, _i))
for _mid in BASKET_MODELS + ("torus4-conformal",):
    register(f"adjoint/{_mid}/gamma-star-one", "adjoint", _ANCHOR_ADJ, "PAPER", 1e-9,
             _gamma_star_one(_mid))
    for _i in range(2):
        register(f"adjoint/{_mid}/trace-equals-L/f{_i}", "adjoint", _ANCHOR_ADJ, "PAPER", 1e-8,
                 _trace_gamma_star(_mid, _i))


# --- divergence form --------------------------------------------------------------------


def _divergence_field(ctx, model_id):
    m = _model(ctx, model_id)
    if model_id == "torus4-conformal":
        e = np.zeros((4, 4))
        e[0, 3] = e[3, 0] = 1.0
        tt = M.conformal_tt(m.params["u"], M.tt_mode_torus(4, [0, 1, 1, 0], e), 4)
        return tt + M.conformal_field(M.trig("cos", [0, 1, 0, 0], amplitude=0.5))
    if model_id == "torus4":
        return (M.tt_mode_torus(4, [1, 0, 0, 0], M.standard_tt_polarization(4))
                + M.conformal_field(M.trig("sin", [1, 1, 0, 0], amplitude=0.3)))
    if model_id == "s2xs2":
        return M.block_metric_field(m, (1.0, -1.0)) + M.conformal_field(
            _poly(m, {1: 0.4, 2: 0.2}, "p"))
    if model_id.startswith("sphere"):
        return M.conformal_field(_poly(m, {1: 0.4, 3: 0.2}, "p"))
    return M.conformal_field(M.trig("sin", [1, 1, 0, 0], amplitude=0.3))


def _divergence(model_id, count):
    def fn(ctx):
        m = _model(ctx, model_id)
        h = _divergence_field(ctx, model_id)
        pts = _points(ctx, model_id, count, "div")

        def both(s):
            hj = h.on(s)
            return np.stack([V.gamma_apply(s, hj), V.gamma_divergence_form(s, hj)[0]], axis=-1)

        vals = Qd.map_points(m, pts, both)
        return _disc(vals[:, 1], vals[:, 0]), 0.0

    return fn


_ANCHOR_DIV = "divergence form of the linearized Q"
register("divergence/torus4-conformal/100-nodes", "divergence", _ANCHOR_DIV, "PAPER", 1e-8,
         _divergence("torus4-conformal", 100))
for _mid in ("torus4", "torus4-perturbed", "sphere4", "s2xs2"):
    register(f"divergence/{_mid}", "divergence", _ANCHOR_DIV, "PAPER", 1e-8, _divergence(_mid, 10))


# --- dual forms -------------------------------------------------------------------------


def _dual(model_id, which):
    def fn(ctx):
        s = _sample(ctx, model_id, 3, "dual")
        if which == "bach":
            a, b = bach(s, "definitional"), bach(s, "scalar_E_form")
        elif which == "T":
            a, b = t_tensor(s, "definitional"), t_tensor(s, "scalar_E_form")
        else:
            a, b = j_tensor(s, "definitional")[1], j_tensor(s, "schouten_form")[1]
        return _disc(b, a), 0.0

    return fn


def _vanishing(model_id):
    def fn(ctx):
        s = _sample(ctx, model_id, 2, "dual")
        vals = [bach(s, "definitional"), bach(s, "scalar_E_form"), t_tensor(s, "definitional"),
                t_tensor(s, "scalar_E_form"), j_tensor(s, "definitional")[1],
                j_tensor(s, "schouten_form")[1]]
        return max(_maxabs(v) for v in vals), 0.0

    return fn


def _trace_j(model_id):
    def fn(ctx):
        s = _sample(ctx, model_id, 2, "dual")
        p = pack(s)
        return _disc(G.trace(s, p.j).value, p.q.value), 0.0

    return fn


_ANCHOR_DUAL = "rewritten Bach, T and traceless J tensors"
for _mid in NON_EINSTEIN:
    for _w in ("bach", "T", "J_ring"):
        register(f"dual/{_mid}/{_w}", "dual", _ANCHOR_DUAL, "PAPER", 1e-8, _dual(_mid, _w))
for _mid in EINSTEIN_MODELS:
    register(f"dual/{_mid}/vanish-on-einstein", "dual", _ANCHOR_DUAL, "PAPER", 1e-9,
             _vanishing(_mid))
for _mid in REGISTRY_MODELS + ("counterexample:t=0.2",):
    register(f"dual/{_mid}/trace-J-equals-Q", "dual", "J tensor", "PAPER", 1e-9, _trace_j(_mid))


# --- Q-curvature identities -------------------------------------------------------------


def _q4(model_id):
    def fn(ctx):
        p = pack(_sample(ctx, model_id, 2, "dual"))
        return _disc(p.q4.value, p.q.value), 0.0

    return fn


def _j_einstein(model_id):
    def fn(ctx):
        s = _sample(ctx, model_id, 2, "dual")
        p = pack(s)
        resid = p.j.value - (p.q.value / s.dim)[..., None, None] * s.g.value
        return _maxabs(resid), 0.0

    return fn


def _trace_j_ring(model_id):
    def fn(ctx):
        s = _sample(ctx, model_id, 2, "dual")
        return _maxabs(G.trace(s, pack(s).j_ring_definitional).value), 0.0

    return fn


def _einstein_scalars(ctx, model_id):
    m = _model(ctx, model_id)
    if m.kind == "sphere":
        return sphere_scalars(ctx, model_id)[:2]
    if m.kind == "product":
        return [_poly(m, {1: 0.7, 2: -0.3}, "p"),
                M.sphere_polynomial(m, {(2, 0): 0.5, (1, 1): 0.2}, factor=1)]
    rng = ctx.rng(f"scalars-{model_id}")
    return [M.trig("sin", _wave(rng, m.dim), 0.4), M.trig("cos", _wave(rng, m.dim))]


def _l_factored(model_id, i):
    def fn(ctx):
        s = _sample(ctx, model_id, 2, "dual")
        u = _einstein_scalars(ctx, model_id)[i]
        lam = _model(ctx, model_id).einstein_lambda
        return _disc(script_l_apply(s, u), script_l_factored(s, u, lam)), 0.0

    return fn


def _weyl_norm(ctx):
    s = _sample(ctx, "s2xs2", 2, "dual")
    return G.norm2(s, pack(s).weyl).value.tolist(), [16.0 / 3.0] * s.size


_ANCHOR_Q = "Q-curvature and the J tensor"
for _mid in ("torus4", "torus4-perturbed", "torus4-conformal", "sphere4", "s2xs2"):
    register(f"qcurvature/{_mid}/dim4-formula", "qcurvature", _ANCHOR_Q, "PAPER", 1e-12, _q4(_mid))
for _mid in REGISTRY_MODELS:
    register(f"qcurvature/{_mid}/trace-J-ring", "qcurvature", _ANCHOR_Q, "PAPER", 1e-9,
             _trace_j_ring(_mid))
for _mid in EINSTEIN_MODELS:
    register(f"qcurvature/{_mid}/J-proportional-to-g", "qcurvature", _ANCHOR_Q, "PAPER", 1e-9,
             _j_einstein(_mid))
for _mid in ("torus4", "sphere3", "sphere4", "s2xs2"):
    for _i in range(2):
        register(f"qcurvature/{_mid}/L-factorization/u{_i}", "qcurvature",
                 "trace operator L on Einstein metrics", "PAPER", 1e-8, _l_factored(_mid, _i))
register("qcurvature/s2xs2/weyl-norm", "qcurvature", _ANCHOR_Q, "DERIVED", 1e-10, _weyl_norm)


# --- TT variations on flat tori ---------------------------------------------------------

_TT_MODES = {
    "torus4/k=x1": ("torus4", (1, 0, 0, 0), (1, 2)),
    "torus4/k=x2+x3": ("torus4", (0, 1, 1, 0), (0, 3)),
    "torus5/k=x1": ("torus5", (1, 0, 0, 0, 0), (1, 2)),
    "torus6/k=x1": ("torus6", (1, 0, 0, 0, 0, 0), (1, 2)),
}


def _tt_mode(key):
    model_id, k, (a, b) = _TT_MODES[key]
    n = len(k)
    e = np.zeros((n, n))
    e[a, b] = e[b, a] = 1.0 / math.sqrt(2.0)
    return model_id, M.tt_mode_torus(n, k, e)


def _tt_closed(ctx, key):
    def build():
        model_id, h = _tt_mode(key)
        s = _sample(ctx, model_id, 2, "tt")
        hj = h.on(s)
        return {"B": V.db_tt_closed_form(s, hj), "T": V.dt_tt_closed_form(s, hj),
                "J_ring": V.dj_ring_tt_closed_form(s, hj), "h": hj.value, "points": s.points}

    return ctx.memo(("tt", key), build)


def _tt_fd(key, quantity):
    def fn(ctx):
        model_id, h = _tt_mode(key)
        c = _tt_closed(ctx, key)
        r = V.fd_variation_oracle(_model(ctx, model_id), quantity, h, points=c["points"],
                                  eps=ctx.eps(1e-3), closed_form=c[quantity])
        return r.rel_err, 0.0

    return fn


def _tt_explicit(key, which):
    def fn(ctx):
        c = _tt_closed(ctx, key)
        ref = c["h"] / 8.0 if which == "J_ring" else -c["h"] / 4.0
        return _maxabs(c[which] - ref) / _maxabs(ref), 0.0

    return fn


def _tt_consistency(key):
    def fn(ctx):
        c = _tt_closed(ctx, key)
        n = c["h"].shape[-1]
        combo = -(c["B"] + (n - 4) / (4.0 * (n - 1)) * c["T"]) / (n - 2)
        return _disc(c["J_ring"], combo), 0.0

    return fn


_ANCHOR_TT = "TT variations of Bach, T and traceless J"
for _key in _TT_MODES:
    for _q in ("B", "T", "J_ring"):
        register(f"tt/{_key}/D{_q}-vs-fd", "tt", _ANCHOR_TT, "PAPER", 1e-5, _tt_fd(_key, _q))
    register(f"tt/{_key}/consistency", "tt", _ANCHOR_TT, "DERIVED", 1e-10, _tt_consistency(_key))
register("tt/torus4/k=x1/DJ_ring=h/8", "tt", _ANCHOR_TT, "DERIVED", 1e-8,
         _tt_explicit("torus4/k=x1", "J_ring"))
register("tt/torus4/k=x1/DB=-h/4", "tt", _ANCHOR_TT, "DERIVED", 1e-8,
         _tt_explicit("torus4/k=x1", "B"))


# --- volume variations ------------------------------------------------------------------


def _volume_field(ctx, model_id):
    if model_id == "s2xs2":
        return M.block_metric_field(_model(ctx, model_id), (0.5, -0.2))
    return zonal_basket(ctx, model_id)[2 if model_id.startswith("sphere") else 0]


def _volume_variation(model_id, order):
    def fn(ctx):
        m = _model(ctx, model_id)
        rule = _rule(ctx, model_id, 16)
        h = _volume_field(ctx, model_id)
        closed = (V.dvol_closed_form if order == 1 else V.d2vol_closed_form)(m, rule, h)
        r = V.fd_variation_oracle(m, "Vol", h, rule=rule, order=order,
                                  eps=ctx.eps(1e-3 if order == 1 else 1e-2), closed_form=closed)
        return r.rel_err, 0.0

    return fn


for _mid in ("torus4-perturbed", "sphere4", "s2xs2"):
    register(f"volume/{_mid}/first", "volume", "volume variations", "PAPER", 1e-8,
             _volume_variation(_mid, 1))
    register(f"volume/{_mid}/second", "volume", "volume variations", "PAPER", 1e-8,
             _volume_variation(_mid, 2))


# --- the functional F -------------------------------------------------------------------


def _F0(ctx, model_id):
    m = _model(ctx, model_id)
    return ctx.memo(("F0", model_id), lambda: V.functional_F(m, m, _rule(ctx, model_id, 16)))


def _f_scaling(model_id, c):
    def fn(ctx):
        m = _model(ctx, model_id)
        return V.functional_F(m, M.scale(m, c), _rule(ctx, model_id, 16)), _F0(ctx, model_id)

    return fn


def _f_critical(model_id, i):
    def fn(ctx):
        m = _model(ctx, model_id)
        h = zonal_basket(ctx, model_id)[i]
        r = V.fd_variation_oracle(m, "F", h, rule=_rule(ctx, model_id, 16), eps=ctx.eps(1e-3))
        return abs(r.fd_oracle) / max(1.0, abs(_F0(ctx, model_id))), 0.0

    return fn


def _unit_tt():
    return M.tt_mode_torus(4, [1, 0, 0, 0], M.standard_tt_polarization(4, unit=True))


def _second_variation_cases(ctx):
    s4, s3 = (_model(ctx, k) for k in ("sphere4", "sphere3"))
    u_t = M.trig("cos", [0, 1, 0, 0], amplitude=0.3)
    return {
        "torus4/unit-tt": ("torus4", _unit_tt(), None),
        "torus4/conformal": ("torus4", None, u_t),
        "torus4/mixed": ("torus4", _unit_tt(), u_t),
        "sphere4/conformal": ("sphere4", None, _poly(s4, {1: 0.3, 2: 0.4}, "p")),
        "sphere3/conformal": ("sphere3", None, _poly(s3, {2: 0.5, 3: 0.2}, "p")),
        "s2xs2/blocks": ("s2xs2", M.block_metric_field(_model(ctx, "s2xs2"), (0.5, -0.5)), None),
    }


def _d2f_closed(ctx, case):
    def build():
        model_id, tt, u = _second_variation_cases(ctx)[case]
        return V.d2F_closed_form(_model(ctx, model_id), _rule(ctx, model_id, 16), tt=tt, u=u)

    return ctx.memo(("d2F", case), build)


def _d2f_vs_fd(case):
    def fn(ctx):
        model_id, tt, u = _second_variation_cases(ctx)[case]
        h = tt if u is None else M.conformal_field(u) if tt is None else tt + M.conformal_field(u)
        fd = V.d2F_fd(_model(ctx, model_id), _rule(ctx, model_id, 16), h, eps=ctx.eps(1e-2))
        closed = _d2f_closed(ctx, case)
        ctx.cache[("d2F-fd", case)] = fd.fd_oracle
        return V.rel_error(closed, fd.fd_oracle), 0.0

    return fn


def _d2f_explicit(ctx):
    return _d2f_closed(ctx, "torus4/unit-tt"), -TWO_PI ** 8 / 8.0


def _d2f_explicit_fd(ctx):
    if ("d2F-fd", "torus4/unit-tt") not in ctx.cache:
        _d2f_vs_fd("torus4/unit-tt")(ctx)
    return ctx.cache[("d2F-fd", "torus4/unit-tt")], -TWO_PI ** 8 / 8.0


def _nonpositive_cases(ctx):
    s4, s3 = (_model(ctx, k) for k in ("sphere4", "sphere3"))
    e = np.zeros((4, 4))
    e[0, 3] = e[3, 0] = 1.0
    return {
        "torus4/tt-x1": ("torus4", _unit_tt(), None),
        "torus4/tt-x2+x3": ("torus4", M.tt_mode_torus(4, [0, 1, 1, 0], e), None),
        "torus4/conformal-cos": ("torus4", None, M.trig("cos", [0, 1, 0, 0])),
        "torus4/tt+conformal": ("torus4", _unit_tt(), M.trig("sin", [1, 1, 0, 0], 0.2)),
        "sphere4/zonal-quadratic": ("sphere4", None, _poly(s4, {2: 1.0}, "p")),
        "sphere4/zonal-cubic": ("sphere4", None, _poly(s4, {1: 0.2, 3: 1.0}, "p")),
        "sphere3/zonal-quadratic": ("sphere3", None, _poly(s3, {2: 1.0, 1: 0.5}, "p")),
    }


def _d2f_nonpositive(case):
    def fn(ctx):
        model_id, tt, u = _nonpositive_cases(ctx)[case]
        d2 = V.d2F_closed_form(_model(ctx, model_id), _rule(ctx, model_id, 16), tt=tt, u=u)
        return max(0.0, d2) / max(1.0, abs(d2)), 0.0

    return fn


_ANCHOR_F = "scale-invariant total Q functional"
for _mid in ("sphere4", "sphere3", "s2xs2", "torus4-perturbed"):
    for _c in (0.5, 2.0):
        register(f"functional/{_mid}/scaling/c={_c:g}", "functional", _ANCHOR_F, "PAPER", 1e-10,
                 _f_scaling(_mid, _c))
for _mid, _idx in (("sphere4", (0, 1, 2)), ("torus4", (0, 1))):
    for _i in _idx:
        register(f"functional/{_mid}/critical/h{_i}", "functional", _ANCHOR_F, "PAPER", 1e-6,
                 _f_critical(_mid, _i))
for _case in ("torus4/unit-tt", "torus4/conformal", "torus4/mixed", "sphere4/conformal",
              "sphere3/conformal", "s2xs2/blocks"):
    register(f"functional/{_case}/d2F-vs-fd", "functional", "second variation of F", "PAPER",
             1e-4, _d2f_vs_fd(_case))
register("functional/torus4/unit-tt/d2F-explicit", "functional", "second variation of F",
         "DERIVED", 1e-10, _d2f_explicit)
register("functional/torus4/unit-tt/d2F-fd-explicit", "functional", "second variation of F",
         "DERIVED", 1e-4, _d2f_explicit_fd)
for _case in ("torus4/tt-x1", "torus4/tt-x2+x3", "torus4/conformal-cos", "torus4/tt+conformal",
              "sphere4/zonal-quadratic", "sphere4/zonal-cubic", "sphere3/zonal-quadratic"):
    register(f"functional/{_case}/d2F-nonpositive", "functional", "second variation of F",
             "PAPER", 0.0, _d2f_nonpositive(_case))


# --- spectral facts of L ----------------------------------------------------------------


def _l_kernel(n, a):
    def fn(ctx):
        mid = f"sphere{n}"
        s = _sample(ctx, mid, 3, "spec")
        return _maxabs(script_l_apply(s, M.sphere_harmonic(_model(ctx, mid), a))), 0.0

    return fn


def _l_flat(i):
    def fn(ctx):
        s = _sample(ctx, "torus4", 3, "spec")
        u = torus_scalars(ctx)[i](J.variables(s.points, 4))
        bi = G.laplacian_scalar(s, G.laplacian_scalar(s, u)).value
        return _disc(script_l_apply(s, u), 0.5 * bi), 0.0

    return fn


def _chebyshev(model, k):
    """``cos(k theta_1)`` as a polynomial in the first ambient coordinate."""
    coeffs = np.polynomial.chebyshev.cheb2poly([0] * k + [1])
    return _poly(model, {d: float(c) for d, c in enumerate(coeffs) if c != 0}, f"cos{k}t")


def _rayleigh(model_id, i):
    def fn(ctx):
        m = _model(ctx, model_id)
        rule = _rule(ctx, model_id, 16)
        if model_id.startswith("sphere"):
            u = _chebyshev(m, i + 1)
        else:
            u = torus_scalars(ctx)[i]
        axes = V.field_axes(m, u)
        mean = Qd.integrate_scalar(m, rule, u, depends_on=axes) / Qd.volume(m, rule)

        def num(s):
            uj = u(J.variables(s.points, 4)) - mean
            return uj.value * script_l_apply(s, uj)

        def den(s):
            return (u(J.variables(s.points, 0)).value - mean) ** 2

        ratio = (Qd.integrate_scalar(m, rule, num, depends_on=axes)
                 / Qd.integrate_scalar(m, rule, den, depends_on=axes, degree=0))
        return max(0.0, -1e-9 - ratio), 0.0

    return fn


_ANCHOR_SPEC = "non-negativity of the trace operator L"
for _n in (3, 4):
    for _a in range(_n + 1):
        register(f"spectral/sphere{_n}/L-kernel/x{_a}", "spectral", _ANCHOR_SPEC, "PAPER", 1e-8,
                 _l_kernel(_n, _a))
for _i in range(3):
    register(f"spectral/torus4/L-flat/u{_i}", "spectral", _ANCHOR_SPEC, "DERIVED", 1e-10,
             _l_flat(_i))
for _mid in ("sphere4", "torus4"):
    for _i in range(4):
        register(f"spectral/{_mid}/rayleigh/u{_i}", "spectral", _ANCHOR_SPEC, "PAPER", 0.0,
                 _rayleigh(_mid, _i))


# --- instability along the product family -----------------------------------------------


def _family_second_derivative(ctx):
    def build():
        base = _model(ctx, "s2cubed")
        rule = _rule(ctx, "s2cubed", 8)
        F = lambda t: V.functional_F(base, M.counterexample_family(t), rule)  # noqa: E731
        f0 = F(0.0)
        e = ctx.eps(0.05)

        def d2(e):
            return (-F(2 * e) + 16 * F(e) - 30 * f0 + 16 * F(-e) - F(-2 * e)) / (12 * e * e)

        return (16.0 * d2(e / 2) - d2(e)) / 15.0, f0

    return ctx.memo("family-d2F", build)


def _instability_ratio(ctx):
    d2, f0 = _family_second_derivative(ctx)
    return _ratio_form(d2 / f0, 7.0 / 24.0)


def _instability_sign(ctx):
    d2, f0 = _family_second_derivative(ctx)
    return max(0.0, -d2) / max(1.0, abs(d2)), 0.0


_ANCHOR_INST = "instability along the product family"
register("instability/s2cubed/d2F-ratio", "instability", _ANCHOR_INST, "DERIVED", 1e-3,
         _instability_ratio)
register("instability/s2cubed/d2F-positive", "instability", _ANCHOR_INST, "PAPER", 0.0,
         _instability_sign)


# --- quadrature -------------------------------------------------------------------------


def _ones():
    f = lambda s: np.ones(s.size)  # noqa: E731
    f.depends_on = ()
    return f


def _doubling_volume(model_id):
    def fn(ctx):
        m = _model(ctx, model_id)
        _, delta = Qd.convergence_delta(m, _ones(), ctx.res(12), degree=0)
        return delta, 0.0

    return fn


def _doubling_q(model_id, res, integrand):
    def fn(ctx):
        m = _model(ctx, model_id)
        _, delta = Qd.convergence_delta(m, integrand, ctx.res(res), depends_on=m.metric_depends_on)
        return delta, 0.0

    return fn


def _ibp_pair(ctx, model_id):
    m = _model(ctx, model_id)
    if m.kind in ("sphere", "product"):
        return _poly(m, {1: 0.6, 2: 0.3}, "f"), _poly(m, {1: -0.2, 3: 0.5}, "w")
    rng = ctx.rng(f"ibp-{model_id}")
    k, l = _wave(rng, m.dim), _wave(rng, m.dim)
    f = M.trig("sin", k, 0.3)
    w1, w2 = M.trig("cos", k), M.trig("sin", l, 0.7)
    # shared wave vector so the pairing does not vanish by orthogonality
    axes = tuple(sorted(set(w1.depends_on) | set(w2.depends_on)))
    w = M.ScalarField(lambda X: w1(X) + w2(X), "w", axes, invariant_axes=axes)
    return f, w


def _ibp(model_id):
    def fn(ctx):
        m = _model(ctx, model_id)
        f, w = _ibp_pair(ctx, model_id)
        rule = _rule(ctx, model_id, 16)
        axes = V.field_axes(m, f, w)

        def side(a, b):
            def integrand(s):
                X = J.variables(s.points, 4)
                return G.laplacian_scalar(s, a(X)).value * b(X).value

            return Qd.integrate_scalar(m, rule, integrand, depends_on=axes)

        return side(f, w), side(w, f)

    return fn


for _mid in ("sphere3", "sphere4", "sphere5", "s2xs2", "torus4-perturbed", "torus4-conformal"):
    register(f"quadrature/{_mid}/volume-doubling", "quadrature", PLUMBING, "TRIVIAL", 1e-10,
             _doubling_volume(_mid))
register("quadrature/torus4-perturbed/Q-doubling", "quadrature", PLUMBING, "TRIVIAL", 1e-10,
         _doubling_q("torus4-perturbed", 12, lambda s: pack(s).q.value))
register("quadrature/s2xs2/gbc-doubling", "quadrature", PLUMBING, "TRIVIAL", 1e-10,
         _doubling_q("s2xs2", 8, _gbc_integrand))
for _mid in ("torus4", "torus4-perturbed", "sphere3", "sphere4", "s2xs2"):
    register(f"quadrature/{_mid}/integration-by-parts", "quadrature", PLUMBING, "TRIVIAL", 1e-9,
             _ibp(_mid))
