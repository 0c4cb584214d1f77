"""Verification reports, the check registry and the counterexample sweep.

Every registered check is a function of a :class:`Context` returning a
``(computed, reference)`` pair; the runner times it and applies the pass
rule ``|computed - reference| <= tolerance * max(1, |reference|)``
elementwise.  Checks that compare whole fields report a scalar discrepancy
measure against a reference of zero; inequality checks report the size of
the violation (zero when the inequality holds).
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
import zlib
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ArgumentError, DomainError

CONVENTIONS_VERSION = (
    "qgeom-1: R_ijkl = g_lm R^m_ijk with R_ijkl = K(g_il g_jk - g_ik g_jl) on space forms; "
    "Ric_jk = g^il R_ijkl; Delta = tr Hess (non-positive); delta h_i = -nabla^k h_ki; "
    "(A.B)_ijkl = A_il B_jk + A_jk B_il - A_ik B_jl - A_jl B_ik; W = Rm - S.g; "
    "Delta_E = Delta + 2 Rm.h; F = Vol(g)^(4/n) int Q(g) dv_base"
)

PROVENANCES = ("PAPER", "TRIVIAL", "DERIVED")
PLUMBING = "plumbing"


@dataclass
class VerificationReport:
    check_id: str
    paper_anchor: str
    computed: object
    reference: object
    provenance: str
    tolerance: float
    passed: bool
    runtime_ms: int
    detail: str = ""

    def to_dict(self, timing: bool = True) -> dict:
        d = {"check_id": self.check_id, "paper_anchor": self.paper_anchor,
             "computed": _jsonable(self.computed), "reference": _jsonable(self.reference),
             "provenance": self.provenance, "tolerance": self.tolerance, "passed": self.passed}
        if timing:
            d["runtime_ms"] = self.runtime_ms
        if self.detail:
            d["detail"] = self.detail
        return d

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status} {self.check_id}: computed={_short(self.computed)} "
                f"reference={_short(self.reference)} tol={self.tolerance:g}"
                + (f" ({self.detail})" if self.detail else ""))


def passes(computed, reference, tolerance: float) -> bool:
    c = np.asarray(computed, dtype=float)
    r = np.asarray(reference, dtype=float)
    if c.shape != r.shape and r.size != 1:
        return False
    if not (np.all(np.isfinite(c)) and np.all(np.isfinite(r))):
        return False
    return bool(np.all(np.abs(c - r) <= tolerance * np.maximum(1.0, np.abs(r))))


def _jsonable(x):
    a = np.asarray(x, dtype=float)
    if a.ndim == 0:
        v = float(a)
        return v if math.isfinite(v) else None
    return [_jsonable(v) for v in a]


def _short(x) -> str:
    a = np.asarray(x, dtype=float)
    if a.ndim == 0:
        return f"{float(a):.10g}"
    if a.size <= 4:
        return "[" + ", ".join(f"{v:.6g}" for v in a.reshape(-1)) + "]"
    return f"[{a.size} values, max |.| {np.max(np.abs(a)):.3g}]"


# --- registry -------------------------------------------------------------------------


@dataclass(frozen=True)
class CheckSpec:
    check_id: str
    group: str
    paper_anchor: str
    provenance: str
    tolerance: float
    fn: Callable = field(repr=False)


_REGISTRY: list = []

# filter aliases kept for compatibility with external report consumers
ALIASES = {"remark6.1": "counterexample"}


def register(check_id: str, group: str, anchor: str, provenance: str, tolerance: float,
             fn: Callable) -> None:
    if provenance not in PROVENANCES:
        raise ArgumentError(f"unknown provenance {provenance!r}")
    if not anchor:
        raise ArgumentError("every check needs an anchor or the plumbing tag")
    if any(c.check_id == check_id for c in _REGISTRY):
        raise ArgumentError(f"duplicate check id {check_id!r}")
    _REGISTRY.append(CheckSpec(check_id, group, anchor, provenance, float(tolerance), fn))


def registry() -> list:
    from . import checks  # noqa: F401  (registers on import)

    return list(_REGISTRY)


def groups() -> list:
    seen = []
    for c in registry():
        if c.group not in seen:
            seen.append(c.group)
    return seen


def select(filter: str | None = None) -> list:
    """Checks matching a group name, an alias, a check id or an id prefix ending at ``/``."""
    checks = registry()
    if filter is None or filter in ("", "all"):
        return checks
    names = [ALIASES.get(f.strip(), f.strip()) for f in filter.split(",") if f.strip()]
    out = []
    for name in names:
        hit = [c for c in checks if c.group == name or c.check_id == name
               or c.check_id.startswith(name.rstrip("/") + "/")]
        if not hit:
            raise ArgumentError(f"unknown filter {name!r}; groups: {', '.join(groups())}")
        out.extend(c for c in hit if c not in out)
    return out


# --- running ----------------------------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    """Options shared by every check.

    ``resolution`` and ``eps`` override the per-check defaults of quadrature
    resolution and finite-difference step when given.
    """

    seed: int = 0
    resolution: int | None = None
    eps: float | None = None

    def __post_init__(self):
        if self.resolution is not None and (int(self.resolution) != self.resolution
                                            or self.resolution < 4):
            raise ArgumentError("resolution must be an integer >= 4")
        if self.eps is not None and not 0 < self.eps <= 0.1:
            raise ArgumentError("eps must lie in (0, 0.1]")


class Context:
    """Per-run state: configuration, seeded generators and a shared cache."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.cache: dict = {}

    def rng(self, key: str) -> np.random.Generator:
        return np.random.default_rng([self.config.seed, zlib.crc32(key.encode())])

    def res(self, default: int) -> int:
        return default if self.config.resolution is None else int(self.config.resolution)

    def eps(self, default: float) -> float:
        return default if self.config.eps is None else float(self.config.eps)

    def memo(self, key, fn):
        if key not in self.cache:
            self.cache[key] = fn()
        return self.cache[key]


def run_check(spec: CheckSpec, ctx: Context) -> VerificationReport:
    t0 = time.perf_counter()
    detail = ""
    try:
        computed, reference = spec.fn(ctx)
        ok = passes(computed, reference, spec.tolerance)
    except Exception as exc:  # a crashing check is a failed check, not a crashed suite
        computed, reference, ok = float("nan"), float("nan"), False
        detail = f"{type(exc).__name__}: {exc}"
    ms = int(round(1e3 * (time.perf_counter() - t0)))
    return VerificationReport(spec.check_id, spec.paper_anchor, computed, reference,
                              spec.provenance, spec.tolerance, ok, ms, detail)


def run_suite(filter: str | None = None, config: RunConfig | None = None,
              progress: Callable | None = None) -> list:
    """Run the selected checks in registry order.

    Parameters
    ----------
    filter : str, optional
        Group name, check id or id prefix; comma-separated lists are allowed.
        ``None`` runs everything.
    config : RunConfig, optional
    progress : callable, optional
        Called with each report as it completes.
    """
    config = RunConfig() if config is None else config
    specs = select(filter)
    ctx = Context(config)
    out = []
    for spec in specs:
        rep = run_check(spec, ctx)
        out.append(rep)
        if progress is not None:
            progress(rep)
    return out


def reports_to_json(reports, config: RunConfig | None = None, timing: bool = False) -> str:
    """Deterministic JSON document; timings are left out unless ``timing``."""
    config = RunConfig() if config is None else config
    body = {"conventions_version": CONVENTIONS_VERSION,
            "config": {"seed": config.seed, "resolution": config.resolution, "eps": config.eps},
            "passed": all(r.passed for r in reports),
            "reports": [r.to_dict(timing) for r in reports]}
    return json.dumps(body, indent=2, sort_keys=False)


def reports_to_csv(reports, timing: bool = False) -> str:
    buf = io.StringIO()
    cols = ["check_id", "paper_anchor", "computed", "reference", "provenance", "tolerance",
            "passed"] + (["runtime_ms"] if timing else [])
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in reports:
        d = r.to_dict(timing)
        w.writerow([json.dumps(d[c]) if c in ("computed", "reference") else d[c] for c in cols])
    return buf.getvalue()


# --- counterexample sweep ---------------------------------------------------------------

SWEEP_COLUMNS = ("t", "Q_formula", "Q_computed", "Vol_ratio_formula", "Vol_ratio_computed",
                 "F_value")


def q_formula(t: float) -> float:
    """Q of the scaled triple product of unit spheres."""
    return (48.0 + 7.0 * t * t - 3.0 * t ** 4) / 50.0


def vol_ratio_formula(t: float) -> float:
    return 1.0 / (1.0 - t ** 4)


def sweep_rows(t_grid, resolution: int = 12, points: int = 4) -> list:
    """One row per ``t``: closed forms against quadrature and pointwise values."""
    from .geometry import metric_sample
    from .models import counterexample_family, get_model
    from .qcurvature import pack
    from .quadrature import build_rule, volume
    from .variations import functional_F

    grid = [float(t) for t in t_grid]
    bad = [t for t in grid if not -1.0 < t < 1.0]
    if bad:
        raise DomainError(f"sweep parameters must lie in (-1, 1): {bad}")
    base = get_model("s2cubed")
    rule = build_rule(base, resolution)
    pts = base.interior_points(points, seed=0)
    v0 = volume(base, rule)
    rows = []
    for t in grid:
        g_t = counterexample_family(t)
        q = pack(metric_sample(g_t, pts, 4)).q.value
        rows.append({"t": t, "Q_formula": q_formula(t), "Q_computed": float(np.mean(q)),
                     "Vol_ratio_formula": vol_ratio_formula(t),
                     "Vol_ratio_computed": volume(g_t, rule, base=base) / v0,
                     "F_value": functional_F(base, g_t, rule)})
    return rows


def counterexample_sweep(t_grid, out=None, resolution: int = 12) -> str:
    """CSV text of :func:`sweep_rows`; written to ``out`` when given."""
    rows = sweep_rows(t_grid, resolution)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: repr(float(v)) for k, v in r.items()})
    text = buf.getvalue()
    if out is not None:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text
