"""Closed model manifolds, their metric families and perturbation fields.

A model is a single chart plus a closed-form metric written with jet
arithmetic, so every derivative the curvature code needs is exact.  Each
chart axis also carries the one-dimensional data the quadrature needs: a
periodic axis has uniform nodes, a polar axis of power ``m`` carries the
``sin(theta)**m`` factor of the reference density.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import jets as J
from .errors import ArgumentError, DomainError, ModelDefinitionError
from .geometry import Chart, MetricSample, metric_sample, trace
from .jets import Jet

TWO_PI = 2.0 * math.pi
POLE_MARGIN = 1e-3


@dataclass(frozen=True)
class Axis:
    """Quadrature data for one chart coordinate.

    ``kind`` is ``"periodic"`` (uniform trapezoid) or ``"polar"`` (angle in
    ``[0, pi]`` whose reference density carries ``sin(theta)**power``).
    """

    kind: str
    power: int = 0

    def density(self, x):
        if self.kind == "polar":
            return np.sin(x) ** self.power
        return np.ones_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class ModelManifold:
    """Closed model space on one chart.

    Attributes
    ----------
    metric_fn : callable
        Maps a list of coordinate jets to the metric jet of shape ``(N, n, n)``.
    axes : tuple of Axis
        Per-coordinate quadrature data.
    density_const : float
        Constant such that ``density_const * prod(axis densities)`` is the
        volume density of the base metric the model was built from.
    metric_depends_on : tuple of int
        Coordinates the metric components actually depend on; integrands
        built from the metric alone are constant along the others.
    """

    name: str
    dim: int
    chart: Chart
    metric_fn: Callable = field(repr=False)
    axes: tuple
    density_const: float = 1.0
    metric_depends_on: tuple = ()
    euler_characteristic: int | None = None
    einstein_lambda: float | None = None
    volume_exact: float | None = None
    params: dict = field(default_factory=dict)
    kind: str = "custom"
    # isometry group acts transitively: scalar invariants of the metric are constant
    homogeneous: bool = False

    def metric_jets(self, X) -> Jet:
        return self.metric_fn(X)

    @property
    def is_einstein(self) -> bool:
        return self.einstein_lambda is not None

    def sample(self, points, degree: int = 4) -> MetricSample:
        return metric_sample(self, points, degree)

    def reference_density(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        rho = np.full(pts.shape[0], self.density_const)
        for a, ax in enumerate(self.axes):
            if ax.kind == "polar":
                rho = rho * ax.density(pts[:, a])
        return rho

    def interior_points(self, count: int, seed: int = 0) -> np.ndarray:
        """Random chart points in the middle 60% of every polar range.

        Near a coordinate singularity the metric inverse carries products of
        ``1 / sin^2`` factors and pointwise curvature loses accuracy
        accordingly, so sample points stay well inside the chart.
        """
        rng = np.random.default_rng(seed)
        pts = np.empty((count, self.dim))
        for a, ((lo, hi), per) in enumerate(zip(self.chart.bounds, self.chart.periodic)):
            pad = 0.0 if per else max(10 * self.chart.singular_locus_margin, 0.2 * (hi - lo))
            pts[:, a] = rng.uniform(lo + pad, hi - pad, count)
        return pts

    def describe(self) -> dict:
        return {"id": self.name, "dim": self.dim, "kind": self.kind,
                "euler_characteristic": self.euler_characteristic,
                "einstein_lambda": self.einstein_lambda,
                "volume": self.volume_exact,
                "params": {k: getattr(v, "name", v) for k, v in self.params.items()}}


# --- metric building blocks -------------------------------------------------


def _diag(entries) -> Jet:
    n = len(entries)
    zero = entries[0] * 0.0
    return J.tensor([[entries[i] if i == j else zero for j in range(n)] for i in range(n)])


def _sphere_block(X, offset: int, k: int):
    """Diagonal entries of the unit round metric on S^k in polar coordinates."""
    entries = [X[offset] * 0.0 + 1.0]
    prod = None
    for a in range(k - 1):
        s = J.sin(X[offset + a])
        s2 = s * s
        prod = s2 if prod is None else prod * s2
        entries.append(prod)
    return entries


def _sphere_axes(k: int):
    return tuple(Axis("polar", k - 1 - a) for a in range(k - 1)) + (Axis("periodic"),)


def _sphere_bounds(k: int):
    return ((0.0, math.pi),) * (k - 1) + ((0.0, TWO_PI),)


def sphere_volume(k: int, radius: float = 1.0) -> float:
    return 2.0 * math.pi ** ((k + 1) / 2) / math.gamma((k + 1) / 2) * radius ** k


def _check_dim(n):
    if int(n) != n or n < 3:
        raise ArgumentError(f"model dimension must be an integer >= 3, got {n}")
    return int(n)


def flat_torus(n: int) -> ModelManifold:
    """``[0, 2pi)^n`` with the identity metric."""
    n = _check_dim(n)

    def metric(X):
        one = X[0] * 0.0 + 1.0
        return _diag([one] * n)

    chart = Chart(n, ((0.0, TWO_PI),) * n, (True,) * n)
    return ModelManifold(f"torus{n}", n, chart, metric, (Axis("periodic"),) * n,
                         euler_characteristic=0 if n == 4 else None, einstein_lambda=0.0,
                         volume_exact=TWO_PI ** n, kind="torus", homogeneous=True)


def round_sphere(n: int, radius: float = 1.0) -> ModelManifold:
    """Round sphere of the given radius in generalized polar coordinates.

    Coordinates are ``n - 1`` polar angles in ``[0, pi]`` followed by an
    azimuth; the metric is ``r^2 (dt1^2 + sin^2 t1 (dt2^2 + ...))``.
    """
    n = _check_dim(n)
    if not radius > 0:
        raise ArgumentError("sphere radius must be positive")
    r2 = radius * radius

    def metric(X):
        return _diag([e * r2 for e in _sphere_block(X, 0, n)])

    chart = Chart(n, _sphere_bounds(n), (False,) * (n - 1) + (True,),
                  singular_axes=tuple(range(n - 1)), singular_locus_margin=POLE_MARGIN)
    name = f"sphere{n}" if radius == 1.0 else f"sphere{n}:r={radius:g}"
    return ModelManifold(name, n, chart, metric, _sphere_axes(n), density_const=radius ** n,
                         metric_depends_on=tuple(range(n - 1)),
                         euler_characteristic=2 if n == 4 else None,
                         einstein_lambda=1.0 / r2, volume_exact=sphere_volume(n, radius),
                         params={"radius": radius}, kind="sphere", homogeneous=True)


def product_spheres(radii=None, *, dims=None, scales=None, name: str | None = None,
                    einstein_lambda="auto") -> ModelManifold:
    """Riemannian product of round spheres.

    Parameters
    ----------
    radii : sequence of float, optional
        Factor radii.  Alternatively give ``scales``, the factors ``c_i``
        multiplying each unit round metric (``c_i = r_i**2``).
    dims : sequence of int, optional
        Factor dimensions, default all 2.
    """
    if (radii is None) == (scales is None):
        raise ArgumentError("give exactly one of radii or scales")
    scales = [float(r) ** 2 for r in radii] if scales is None else [float(c) for c in scales]
    if any(not c > 0 for c in scales):
        raise ArgumentError("factor radii/scales must be positive")
    dims = [2] * len(scales) if dims is None else [int(k) for k in dims]
    if len(dims) != len(scales) or any(k < 2 for k in dims):
        raise ArgumentError("factor dimensions must be >= 2 and match the radii")
    n = _check_dim(sum(dims))
    offsets = np.cumsum([0] + dims[:-1]).tolist()

    def metric(X):
        entries = []
        for off, k, c in zip(offsets, dims, scales):
            entries += [e * c for e in _sphere_block(X, off, k)]
        return _diag(entries)

    bounds, periodic, singular, axes, depends = (), (), (), (), ()
    for off, k in zip(offsets, dims):
        bounds += _sphere_bounds(k)
        periodic += (False,) * (k - 1) + (True,)
        singular += tuple(range(off, off + k - 1))
        axes += _sphere_axes(k)
        depends += tuple(range(off, off + k - 1))
    chart = Chart(n, bounds, periodic, singular_axes=singular, singular_locus_margin=POLE_MARGIN)
    const = float(np.prod([c ** (k / 2) for c, k in zip(scales, dims)]))
    vol = float(np.prod([sphere_volume(k) * c ** (k / 2) for c, k in zip(scales, dims)]))
    if einstein_lambda == "auto":
        ricci = {(k - 1) / c for c, k in zip(scales, dims)}
        einstein_lambda = ricci.pop() / (n - 1) if len(ricci) == 1 else None
    chi = 2 ** len(dims) if n == 4 and all(k % 2 == 0 for k in dims) else None
    if name is None:
        name = "x".join(f"s{k}" for k in dims)
        if any(c != 1.0 for c in scales):
            name += ":c=" + ",".join(f"{c:g}" for c in scales)
    return ModelManifold(name, n, chart, metric, axes, density_const=const,
                         metric_depends_on=depends, euler_characteristic=chi,
                         einstein_lambda=einstein_lambda, volume_exact=vol,
                         params={"scales": tuple(scales), "dims": tuple(dims)}, kind="product",
                         homogeneous=True)


def counterexample_scales(t: float):
    return ((1 + t * t) ** -1, (1 - t) ** -1, (1 + t) ** -1)


def counterexample_family(t: float) -> ModelManifold:
    """Scaled product ``(1+t^2)^-1 g1 + (1-t)^-1 g2 + (1+t)^-1 g3`` on S2xS2xS2."""
    t = float(t)
    if not -1.0 < t < 1.0:
        raise DomainError(f"counterexample parameter must lie in (-1, 1), got {t}")
    model = product_spheres(scales=counterexample_scales(t), name=f"counterexample:t={t:g}",
                            einstein_lambda=0.2 if t == 0 else None)
    return replace(model, params={"t": t, **model.params}, kind="counterexample")


# --- derived models ------------------------------------------------------------


def scale(model: ModelManifold, c: float) -> ModelManifold:
    """The same chart with metric ``c^2 g``."""
    if not c > 0:
        raise ArgumentError("scale factor must be positive")
    c2 = float(c) ** 2
    n = model.dim
    return replace(
        model, name=f"{model.name}*{c:g}", metric_fn=lambda X: model.metric_fn(X) * c2,
        density_const=model.density_const * c ** n,
        einstein_lambda=None if model.einstein_lambda is None else model.einstein_lambda / c2,
        volume_exact=None if model.volume_exact is None else model.volume_exact * c ** n,
        params={**model.params, "scale": c})


def perturbed(model: ModelManifold, h: "TensorField", eps: float) -> ModelManifold:
    """Metric ``g + eps h`` on the same chart; base density kept for quadrature."""
    if eps == 0:
        return model

    def metric(X):
        g = model.metric_fn(X)
        return g + eps * h.evaluate(X, g)

    return replace(model, name=f"{model.name}+{eps:g}*{h.name}", metric_fn=metric,
                   metric_depends_on=_union(model.metric_depends_on, h.depends_on),
                   einstein_lambda=None, volume_exact=None, euler_characteristic=None,
                   kind="perturbed", homogeneous=False)


def conformal_perturb(model: ModelManifold, u: "ScalarField", eps: float = 1.0) -> ModelManifold:
    """Metric ``exp(2 eps u) g``; ``eps = 0`` returns the model unchanged."""
    if eps == 0:
        return model

    def metric(X):
        return model.metric_fn(X) * J.exp(2.0 * eps * u(X))[..., None, None]

    return replace(model, name=f"{model.name}*exp(2*{eps:g}*{u.name})", metric_fn=metric,
                   metric_depends_on=_union(model.metric_depends_on, u.depends_on),
                   einstein_lambda=None, volume_exact=None, kind="conformal", homogeneous=False)


def power_conformal(model: ModelManifold, w: "ScalarField") -> ModelManifold:
    """Metric ``w^(4/(n-4)) g`` for ``n != 4``."""
    n = model.dim
    if n == 4:
        raise ArgumentError("power conformal factor is undefined in dimension 4")

    def metric(X):
        return model.metric_fn(X) * J.powr(w(X), 4.0 / (n - 4))[..., None, None]

    return replace(model, name=f"{model.name}*{w.name}^(4/{n - 4})", metric_fn=metric,
                   metric_depends_on=_union(model.metric_depends_on, w.depends_on),
                   einstein_lambda=None, volume_exact=None, kind="conformal", homogeneous=False)


def _union(a, b):
    return tuple(sorted(set(a) | set(b)))


# --- fields --------------------------------------------------------------------


@dataclass(frozen=True)
class ScalarField:
    """Closed-form function of the chart coordinates, evaluated on jets.

    ``depends_on`` lists the coordinates the function varies along.
    ``invariant_axes``, when set, lists the coordinates along which scalar
    invariants built from the field and a homogeneous base metric can vary
    (a zonal function on a sphere varies only with the first polar angle).
    """

    fn: Callable = field(repr=False)
    name: str = "u"
    depends_on: tuple = ()
    invariant_axes: tuple | None = None

    def __call__(self, X) -> Jet:
        out = self.fn(X)
        if not isinstance(out, Jet):
            out = J.Jet.constant(np.broadcast_to(out, X[0].shape), X[0].dim, X[0].degree)
        return out


@dataclass(frozen=True)
class TensorField:
    """Closed-form symmetric 2-tensor field ``h``; ``fn(X, g)`` returns its jet.

    ``depends_on`` and ``invariant_axes`` have the meaning documented on
    :class:`ScalarField`.
    """

    fn: Callable = field(repr=False)
    name: str = "h"
    depends_on: tuple = ()
    claimed_tt: bool = False
    claimed_conformal: bool = False
    invariant_axes: tuple | None = None

    def evaluate(self, X, g: Jet) -> Jet:
        return self.fn(X, g)

    def on(self, sample: MetricSample) -> Jet:
        """Jet of the field at the sample points, at the metric's degree."""
        return self.fn(J.variables(sample.points, sample.g.degree), sample.g)

    def __add__(self, other: "TensorField") -> "TensorField":
        inv = (None if self.invariant_axes is None or other.invariant_axes is None
               else _union(self.invariant_axes, other.invariant_axes))
        return TensorField(lambda X, g: self.fn(X, g) + other.fn(X, g), f"{self.name}+{other.name}",
                           _union(self.depends_on, other.depends_on), invariant_axes=inv)

    def scaled(self, c: float) -> "TensorField":
        return replace(self, fn=lambda X, g: self.fn(X, g) * c, name=f"{c:g}*{self.name}")


def conformal_field(u: ScalarField) -> TensorField:
    """``h = u g``."""
    return TensorField(lambda X, g: g * u(X)[..., None, None], f"({u.name})g", u.depends_on,
                       claimed_conformal=True, invariant_axes=u.invariant_axes)


def metric_field() -> TensorField:
    return TensorField(lambda X, g: g * 1.0, "g", (), claimed_conformal=True, invariant_axes=())


def trig(kind: str, k, phase: float = 0.0, amplitude: float = 1.0) -> ScalarField:
    """``amplitude * sin(k . x + phase)`` (or cos) on a torus chart."""
    k = np.asarray(k, dtype=float)

    def fn(X):
        arg = sum((ki * X[i] for i, ki in enumerate(k) if ki != 0), X[0] * 0.0) + phase
        return (J.sin(arg) if kind == "sin" else J.cos(arg)) * amplitude

    axes = tuple(int(i) for i in np.flatnonzero(k))
    return ScalarField(fn, f"{amplitude:g}*{kind}({_kx(k)}{'+%g' % phase if phase else ''})", axes,
                       invariant_axes=axes)


def _kx(k):
    return "+".join(f"{v:g}x{i + 1}" if v != 1 else f"x{i + 1}" for i, v in enumerate(k) if v != 0)


def tt_mode_torus(n: int, k, e, kind: str = "sin") -> TensorField:
    """``sin(k . x) e`` on the flat torus; ``e`` must be symmetric, trace-free and transverse."""
    k = np.asarray(k, dtype=float)
    e = np.asarray(e, dtype=float)
    if k.shape != (n,) or e.shape != (n, n):
        raise ArgumentError("wave vector / polarization have the wrong shape")
    if np.any(np.abs(k - np.round(k)) > 0):
        raise ArgumentError("wave vector must be integral to be periodic")
    if not np.allclose(e, e.T, atol=1e-14):
        raise ArgumentError("polarization must be symmetric")
    if abs(np.trace(e)) > 1e-14:
        raise ArgumentError("polarization must be trace-free")
    if np.any(np.abs(e @ k) > 1e-14):
        raise ArgumentError("polarization must be transverse to the wave vector")
    u = trig(kind, k)
    return TensorField(lambda X, g: J.Jet.constant(e, X[0].dim, X[0].degree) * u(X)[:, None, None],
                       f"{u.name}*e", u.depends_on, claimed_tt=True, invariant_axes=u.depends_on)


def standard_tt_polarization(n: int, unit: bool = False) -> np.ndarray:
    """``dx2 dx3 + dx3 dx2``; with ``unit`` normalised to flat norm 1."""
    e = np.zeros((n, n))
    e[1, 2] = e[2, 1] = 1.0
    return e / math.sqrt(2.0) if unit else e


def constant_tensor(e, name="e") -> TensorField:
    e = np.asarray(e, dtype=float)
    return TensorField(lambda X, g: J.Jet.constant(np.broadcast_to(e, X[0].shape + e.shape),
                                                   X[0].dim, X[0].degree), name, ())


def conformal_tt(u: ScalarField, h_flat: TensorField, n: int) -> TensorField:
    """TT tensor ``exp(-(n-2) u) h`` for the metric ``exp(2u)`` times flat, ``h`` flat TT."""
    return TensorField(lambda X, g: h_flat.evaluate(X, g) * J.exp(-(n - 2) * u(X))[:, None, None],
                       f"exp(-{n - 2}{u.name}){h_flat.name}",
                       _union(u.depends_on, h_flat.depends_on), claimed_tt=True)


def sphere_embedding(X, offset: int, k: int, radius: float = 1.0):
    """Embedding coordinates of S^k and their chart Jacobian, as jets.

    Returns ``(x, dx)`` with ``x[a]`` the jets of the ``k + 1`` ambient
    coordinates and ``dx[a][j]`` the jet of ``d x_a / d theta_j``; the
    Jacobian is written in closed form so it keeps the full jet degree.
    """
    s = [J.sin(X[offset + j]) for j in range(k)]
    c = [J.cos(X[offset + j]) for j in range(k)]
    # x_a = r sin_0 ... sin_{a-1} cos_a for a < k, x_k = r sin_0 ... sin_{k-1}
    factors = [[(j, "s") for j in range(a)] + [(a, "c")] for a in range(k)]
    factors.append([(j, "s") for j in range(k)])
    base = {"s": s, "c": c}
    deriv = {"s": c, "c": [-v for v in s]}
    zero = X[offset] * 0.0

    def prod(terms):
        out = zero + radius
        for j, kind in terms:
            out = out * base[kind][j]
        return out

    x = [prod(f) for f in factors]
    dx = []
    for f in factors:
        row = []
        for j in range(k):
            hit = [i for i, (jj, _) in enumerate(f) if jj == j]
            if not hit:
                row.append(zero)
                continue
            out = zero + radius
            for i, (jj, kind) in enumerate(f):
                out = out * (deriv[kind][jj] if i == hit[0] else base[kind][jj])
            row.append(out)
        dx.append(row)
    return x, dx


def sphere_harmonic(model: ModelManifold, a: int = 0, factor: int = 0) -> ScalarField:
    """Ambient coordinate ``x_a / r`` restricted to a sphere (or a sphere factor)."""
    off, k, r = _factor_layout(model, factor)
    if not 0 <= a <= k:
        raise ArgumentError(f"ambient index {a} out of range for S^{k}")
    depends = tuple(range(off, off + min(a + 1, k)))
    if a >= k - 1:
        depends = tuple(range(off, off + k))
    return ScalarField(lambda X: sphere_embedding(X, off, k)[0][a], f"x{a}", depends,
                       invariant_axes=(off,) if a == 0 else None)


def sphere_polynomial(model: ModelManifold, coeffs: dict, factor: int = 0,
                      name: str = "p") -> ScalarField:
    """Polynomial in the ambient coordinates, ``coeffs`` maps exponent tuples to reals."""
    off, k, _ = _factor_layout(model, factor)

    def fn(X):
        x, _ = sphere_embedding(X, off, k)
        out = X[0] * 0.0
        for expo, cval in coeffs.items():
            term = X[0] * 0.0 + cval
            for a, p in enumerate(expo):
                for _ in range(p):
                    term = term * x[a]
            out = out + term
        return out

    used = {a for expo in coeffs for a, p in enumerate(expo) if p}
    depends = set()
    for a in used:
        depends |= set(range(off, off + min(a + 1, k))) if a < k - 1 else set(range(off, off + k))
    return ScalarField(fn, name, tuple(sorted(depends)),
                       invariant_axes=(off,) if used <= {0} else None)


def sphere_pullback(model: ModelManifold, m, factor: int = 0, weight: ScalarField | None = None,
                    name: str = "pullback") -> TensorField:
    """``w * sum_ab M_ab dx_a dx_b`` for a constant symmetric ambient matrix ``M``."""
    off, k, r = _factor_layout(model, factor)
    m = np.asarray(m, dtype=float)
    if m.shape != (k + 1, k + 1) or not np.allclose(m, m.T):
        raise ArgumentError("ambient matrix must be symmetric of size k+1")
    n = model.dim

    def fn(X, g):
        _, dx = sphere_embedding(X, off, k, r)
        zero = X[0] * 0.0
        rows = [[zero for _ in range(n)] for _ in range(n)]
        for i in range(k):
            for j in range(i, k):
                acc = zero
                for a in range(k + 1):
                    for b in range(k + 1):
                        if m[a, b] != 0:
                            acc = acc + dx[a][i] * dx[b][j] * m[a, b]
                rows[off + i][off + j] = acc
                rows[off + j][off + i] = acc
        h = J.tensor(rows)
        if weight is not None:
            h = h * weight(X)[:, None, None]
        return h

    depends = tuple(range(off, off + k))
    zonal = not np.any(np.delete(np.delete(m, 0, 0), 0, 1)) and not np.any(m[0, 1:])
    inv = (off,) if zonal else None
    if weight is not None:
        depends = _union(depends, weight.depends_on)
        inv = None if inv is None or weight.invariant_axes is None else _union(inv, weight.invariant_axes)
    return TensorField(fn, name, depends, invariant_axes=inv)


def block_metric_field(model: ModelManifold, coefficients) -> TensorField:
    """``sum_i a_i g^i`` over the factors of a product of spheres."""
    dims = model.params.get("dims")
    if dims is None or len(coefficients) != len(dims):
        raise ArgumentError("block field needs one coefficient per sphere factor")
    mask = np.concatenate([np.full(k, float(a)) for a, k in zip(coefficients, dims)])

    n = model.dim
    # g is block diagonal, so scaling row p by its factor coefficient is enough
    weights = np.broadcast_to(mask[:, None], (n, n))

    def fn(X, g):
        return g * weights

    return TensorField(fn, "blocks(" + ",".join(f"{a:g}" for a in coefficients) + ")", (),
                       claimed_tt=abs(float(np.dot(coefficients, dims))) < 1e-14, invariant_axes=())


def _factor_layout(model: ModelManifold, factor: int):
    if model.kind == "sphere":
        if factor != 0:
            raise ArgumentError("a round sphere has a single factor")
        return 0, model.dim, model.params.get("radius", 1.0)
    dims = model.params.get("dims")
    if dims is None:
        raise ArgumentError(f"{model.name} is not a sphere or product of spheres")
    if not 0 <= factor < len(dims):
        raise ArgumentError("factor index out of range")
    off = int(sum(dims[:factor]))
    return off, dims[factor], math.sqrt(model.params["scales"][factor])


# --- decomposition and verification ---------------------------------------------


def trace_decompose(sample: MetricSample, h: Jet):
    """``(h_ring, tr h)`` with ``h = h_ring + (tr h / n) g``."""
    tr = trace(sample, h)
    g = sample.g.truncate(h.degree) if sample.g.degree > h.degree else sample.g
    return h - g * (tr / sample.dim)[..., None, None], tr


def verify_field(model: ModelManifold, h: TensorField, points, tol: float = 1e-9) -> dict:
    """Check the TT / conformal claims of a field at the given points."""
    from .geometry import delta

    s = metric_sample(model, points, 4)
    X = J.variables(s.points, 4)
    hj = h.evaluate(X, s.g)
    ring, tr = trace_decompose(s, hj)
    out = {"trace": float(np.max(np.abs(tr.value))),
           "divergence": float(np.max(np.abs(delta(s, hj).value))),
           "traceless_part": float(np.max(np.abs(ring.value)))}
    if h.claimed_tt and (out["trace"] > tol or out["divergence"] > tol):
        raise ModelDefinitionError(f"{h.name} is not TT on {model.name}: {out}")
    if h.claimed_conformal and out["traceless_part"] > tol:
        raise ModelDefinitionError(f"{h.name} is not pure trace on {model.name}: {out}")
    return out


def certify_einstein(model: ModelManifold, points=None, tol: float = 1e-10) -> float:
    """Max of ``|Ric - (n-1) lambda g|`` over points; raises if above ``tol``."""
    if model.einstein_lambda is None:
        raise ArgumentError(f"{model.name} carries no Einstein certificate")
    if points is None:
        points = certificate_nodes(model)
    s = metric_sample(model, points, 2)
    resid = s.ricci.value - (model.dim - 1) * model.einstein_lambda * s.g.value
    err = float(np.max(np.abs(resid)))
    if err > tol:
        raise ModelDefinitionError(f"Einstein certificate of {model.name} fails: {err:.3e}")
    return err


CERTIFICATE_NODE_BUDGET = 1500


def certificate_nodes(model: ModelManifold, resolution: int | None = None):
    """Reduced quadrature nodes along the axes the metric depends on.

    Without ``resolution`` the per-axis count is the largest one in ``[4, 6]``
    keeping the grid within :data:`CERTIFICATE_NODE_BUDGET` points.
    """
    from .quadrature import build_rule

    if resolution is None:
        k = max(1, len(model.metric_depends_on))
        resolution = min(6, max(4, int(CERTIFICATE_NODE_BUDGET ** (1.0 / k))))
    pts, _ = build_rule(model, resolution).reduced(model.metric_depends_on)
    return pts


# --- registry ----------------------------------------------------------------------


def _perturbed_torus(n: int) -> ModelManifold:
    """Non-conformally-flat, non-Einstein metric on T^n."""

    def metric(X):
        zero = X[0] * 0.0
        s1, c2 = J.sin(X[0]), J.cos(X[1])
        rows = [[zero for _ in range(n)] for _ in range(n)]
        for i in range(n):
            rows[i][i] = zero + 1.0
        rows[0][0] = rows[0][0] + s1 * 0.1
        rows[1][1] = rows[1][1] + c2 * 0.1
        rows[2][2] = rows[2][2] + J.sin(X[0] + X[1]) * 0.05
        off = J.cos(X[0] - X[1]) * 0.05
        rows[2][3] = rows[3][2] = off
        prod = s1 * c2 * 0.04
        rows[0][1] = rows[1][0] = prod
        return J.tensor(rows)

    base = flat_torus(n)
    return replace(base, name=f"torus{n}-perturbed", metric_fn=metric, metric_depends_on=(0, 1),
                   einstein_lambda=None, volume_exact=None, euler_characteristic=None,
                   kind="perturbed", homogeneous=False)


def conformal_torus(n: int, amplitude: float = 0.1) -> ModelManifold:
    u = trig("sin", np.eye(n)[0], amplitude=amplitude)
    model = conformal_perturb(flat_torus(n), u)
    return replace(model, name=f"torus{n}-conformal", params={"u": u}, euler_characteristic=None)


_FIXED = {
    "torus3": lambda: flat_torus(3),
    "torus4": lambda: flat_torus(4),
    "torus5": lambda: flat_torus(5),
    "torus6": lambda: flat_torus(6),
    "sphere3": lambda: round_sphere(3),
    "sphere4": lambda: round_sphere(4),
    "sphere5": lambda: round_sphere(5),
    "sphere6": lambda: round_sphere(6),
    "s2xs2": lambda: product_spheres([1.0, 1.0], name="s2xs2"),
    "s2cubed": lambda: product_spheres([1.0, 1.0, 1.0], name="s2cubed"),
    "torus4-conformal": lambda: conformal_torus(4),
    "torus4-perturbed": lambda: _perturbed_torus(4),
}

_CACHE: dict = {}


def model_ids() -> list:
    return list(_FIXED) + ["counterexample:t=<t>", "sphere<n>:r=<radius>"]


def get_model(model_id: str, certify: bool = True) -> ModelManifold:
    """Look up a model by registry id; Einstein certificates are checked once."""
    key = model_id.strip()
    if key in _CACHE:
        return _CACHE[key]
    if key in _FIXED:
        model = _FIXED[key]()
    elif (m := re.fullmatch(r"counterexample:t=([-+0-9.eE]+)", key)):
        model = counterexample_family(float(m.group(1)))
    elif (m := re.fullmatch(r"sphere(\d+):r=([0-9.eE+-]+)", key)):
        model = round_sphere(int(m.group(1)), float(m.group(2)))
    else:
        raise ArgumentError(f"unknown model id {model_id!r}; known: {', '.join(model_ids())}")
    if certify and model.is_einstein:
        certify_einstein(model)
    _CACHE[key] = model
    return model


def list_models() -> list:
    return [get_model(k, certify=False).describe() for k in _FIXED]
