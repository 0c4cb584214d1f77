"""Tensor-product quadrature on model charts.

Periodic coordinates use the uniform trapezoid rule.  A polar angle whose
reference density carries ``sin(theta)**m`` uses Gauss-Jacobi nodes in
``x = cos(theta)`` with ``alpha = beta = (m - 1) / 2``, which is
Gauss-Legendre for ``m = 1``; the rule then integrates
``f(theta) sin(theta)**m`` exactly for polynomial ``f(cos theta)`` and
spectrally otherwise.

Weights are chart-measure weights: they do not include the metric volume
density, so one rule serves every metric on the chart.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import roots_jacobi

from . import jets as J
from .errors import ArgumentError
from .geometry import MetricSample, dot, metric_sample
from .models import ModelManifold, ScalarField, TensorField

MIN_RESOLUTION = 4
DEFAULT_RESOLUTION = 24
_CHUNK_BUDGET = 1.5e7


@dataclass(frozen=True)
class QuadratureRule:
    """Per-axis nodes and weights of a tensor-product rule.

    ``axis_weights[a]`` are chart-measure weights and ``axis_density[a]``
    the polar density factor at the nodes, so ``axis_weights * axis_density``
    integrates against the reference volume density of the model.
    """

    model: str
    resolution: tuple
    axis_nodes: tuple
    axis_weights: tuple
    axis_density: tuple
    density_const: float

    @cached_property
    def nodes(self) -> np.ndarray:
        grids = np.meshgrid(*self.axis_nodes, indexing="ij")
        return np.stack([g.reshape(-1) for g in grids], axis=-1)

    @cached_property
    def weights(self) -> np.ndarray:
        w = self.axis_weights[0]
        for a in self.axis_weights[1:]:
            w = np.multiply.outer(w, a)
        return w.reshape(-1)

    @property
    def size(self) -> int:
        return int(np.prod(self.resolution))

    def reduced(self, depends_on=None):
        """Nodes and reference-density weights for an integrand constant off ``depends_on``.

        Coordinates outside ``depends_on`` are pinned to a fixed node and
        their one-dimensional reference integrals folded into the weights,
        so ``sum(w * F(p))`` equals the full-grid sum of ``F dv_ref``
        whenever ``F`` does not vary along the pinned coordinates.
        """
        dim = len(self.resolution)
        depends_on = tuple(range(dim)) if depends_on is None else tuple(sorted(set(depends_on)))
        if any(not 0 <= a < dim for a in depends_on):
            raise ArgumentError(f"axis out of range in {depends_on}")
        fold = self.density_const
        grids, weights = [], []
        for a in range(dim):
            wd = self.axis_weights[a] * self.axis_density[a]
            if a in depends_on:
                grids.append(self.axis_nodes[a])
                weights.append(wd)
            else:
                fold *= float(np.sum(wd))
                grids.append(self.axis_nodes[a][[len(self.axis_nodes[a]) // 2]])
                weights.append(np.ones(1))
        mesh = np.meshgrid(*grids, indexing="ij")
        pts = np.stack([m.reshape(-1) for m in mesh], axis=-1)
        w = weights[0]
        for a in weights[1:]:
            w = np.multiply.outer(w, a)
        return pts, w.reshape(-1) * fold


def _resolution(resolution, dim):
    res = (resolution,) * dim if np.isscalar(resolution) else tuple(resolution)
    if len(res) != dim:
        raise ArgumentError(f"resolution needs {dim} entries")
    if any(int(r) != r or r < MIN_RESOLUTION for r in res):
        raise ArgumentError(f"resolution must be an integer >= {MIN_RESOLUTION} per axis: {res}")
    return tuple(int(r) for r in res)


def build_rule(model: ModelManifold, resolution=DEFAULT_RESOLUTION) -> QuadratureRule:
    res = _resolution(resolution, model.dim)
    nodes, weights, dens = [], [], []
    for a, (ax, r, (lo, hi)) in enumerate(zip(model.axes, res, model.chart.bounds)):
        if ax.kind == "periodic":
            h = (hi - lo) / r
            x = lo + h * np.arange(r)
            w = np.full(r, h)
            d = np.ones(r)
        elif ax.kind == "polar":
            alpha = (ax.power - 1) / 2.0
            xc, wc = roots_jacobi(r, alpha, alpha)
            x = np.arccos(xc)[::-1]
            d = np.sin(x) ** ax.power
            w = wc[::-1] / d
        else:
            raise ArgumentError(f"unknown axis kind {ax.kind!r}")
        nodes.append(x)
        weights.append(w)
        dens.append(d)
    return QuadratureRule(model.name, res, tuple(nodes), tuple(weights), tuple(dens),
                          model.density_const)


def chunk_size(dim: int, degree: int) -> int:
    """Points per batch keeping the largest curvature intermediate near the budget."""
    pairs = math.comb(2 * dim + degree, degree) if degree else 1
    return max(1, int(_CHUNK_BUDGET // (dim ** 4 * pairs)))


def map_points(model: ModelManifold, points, fn, degree: int = 4) -> np.ndarray:
    """Evaluate ``fn(sample)`` on batches of metric samples and concatenate."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    step = chunk_size(model.dim, degree)
    out = [np.asarray(fn(metric_sample(model, pts[i:i + step], degree)))
           for i in range(0, pts.shape[0], step)]
    return np.concatenate(out, axis=0)


def integrate_scalar(model: ModelManifold, rule: QuadratureRule, field, *, depends_on=None,
                     degree: int = 4, base: ModelManifold | None = None) -> float:
    """``sum w * field * sqrt(det g)`` over the rule.

    Parameters
    ----------
    model : ModelManifold
        Supplies the metric ``g`` whose volume density weights the field.
    field : callable or ScalarField
        ``field(sample)`` returning values at the sample points.
    depends_on : tuple of int, optional
        Coordinates the integrand varies along.  Defaults to the metric's
        dependence axes joined with the field's ``depends_on`` attribute
        (all axes when the field declares none).
    base : ModelManifold, optional
        Model whose reference density the rule folds in; defaults to ``model``.
        Both must share a chart.
    """
    base = model if base is None else base
    if isinstance(field, ScalarField):
        sf = field
        field = lambda s: sf(J.variables(s.points, s.g.degree)).value  # noqa: E731
        field.depends_on = sf.depends_on
    if depends_on is None:
        own = getattr(field, "depends_on", tuple(range(model.dim)))
        depends_on = set(model.metric_depends_on) | set(own)
    pts, w = rule.reduced(depends_on)
    ref = base.reference_density(pts)

    def integrand(s: MetricSample):
        return np.asarray(field(s)) * s.vol_density.value

    vals = map_points(model, pts, integrand, degree)
    return float(np.sum(w * vals / ref))


def volume(model: ModelManifold, rule: QuadratureRule, base: ModelManifold | None = None) -> float:
    ones = lambda s: np.ones(s.size)  # noqa: E731
    ones.depends_on = ()
    return integrate_scalar(model, rule, ones, degree=0, base=base)


def l2_inner(model: ModelManifold, rule: QuadratureRule, a: TensorField, b: TensorField,
             *, depends_on=None) -> float:
    """``int <a, b>_g dv_g`` for symmetric 2-tensor fields."""

    def field(s):
        return dot(s, a.on(s), b.on(s)).value

    field.depends_on = tuple(sorted(set(a.depends_on) | set(b.depends_on)))
    return integrate_scalar(model, rule, field, depends_on=depends_on, degree=0)


def convergence_delta(model: ModelManifold, field, resolution=DEFAULT_RESOLUTION, **kw):
    """Integral at ``resolution`` and its relative change on doubling."""
    res = _resolution(resolution, model.dim)
    v1 = integrate_scalar(model, build_rule(model, res), field, **kw)
    v2 = integrate_scalar(model, build_rule(model, tuple(2 * r for r in res)), field, **kw)
    return v1, abs(v2 - v1) / max(1.0, abs(v1))
