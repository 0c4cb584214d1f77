"""Command-line front end.

Exit codes: 0 when everything requested succeeded and every check passed,
1 when a verification check failed, 2 on usage errors (bad flags, unknown
models or filters, points outside the chart).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from . import geometry as G
from . import quadrature as Qd
from .errors import ArgumentError, DomainError, PreconditionError, SingularValueError
from .models import get_model, list_models
from .qcurvature import pack
from .report import (CONVENTIONS_VERSION, RunConfig, counterexample_sweep, reports_to_csv,
                     reports_to_json, run_suite, sweep_rows)
from .variations import functional_F

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

# name -> (extractor on a curvature pack, variance or None for scalars)
_POINT_QUANTITIES = {
    "Q": (lambda p: p.q, None),
    "Q4": (lambda p: p.q4, None),
    "R": (lambda p: p.R, None),
    "weyl_norm2": (lambda p: G.norm2(p.s, p.weyl), None),
    "vol_density": (lambda p: p.s.vol_density, None),
    "g": (lambda p: p.g, ("down", "down")),
    "Ric": (lambda p: p.ric, ("down", "down")),
    "Riemann": (lambda p: p.rm, ("down",) * 4),
    "Weyl": (lambda p: p.weyl, ("down",) * 4),
    "Schouten": (lambda p: p.schouten, ("down", "down")),
    "Bach": (lambda p: p.bach_definitional, ("down", "down")),
    "T": (lambda p: p.t_definitional, ("down", "down")),
    "J": (lambda p: p.j, ("down", "down")),
    "J_ring": (lambda p: p.j_ring_definitional, ("down", "down")),
}

_INTEGRALS = ("vol", "Q", "Q+W2/4", "W2", "F")


def _floats(text: str, what: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ArgumentError(f"{what} must be a comma-separated list of numbers: {text!r}") from None


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


# --- subcommands -----------------------------------------------------------------------


def cmd_compute(args) -> int:
    model = get_model(args.model)
    if args.quantity not in _POINT_QUANTITIES:
        raise ArgumentError(f"unknown quantity {args.quantity!r}; choose from "
                            f"{', '.join(_POINT_QUANTITIES)}")
    if args.point is None:
        point = model.interior_points(1, seed=args.seed)[0]
    else:
        point = np.asarray(_floats(args.point, "--point"))
        if point.shape != (model.dim,):
            raise ArgumentError(f"{model.name} needs a point with {model.dim} coordinates")
    sample = G.metric_sample(model, point, 4)
    extract, variance = _POINT_QUANTITIES[args.quantity]
    jet = extract(pack(sample))
    values = np.asarray(sample.out(jet.value), dtype=float)
    point = np.asarray(sample.points[0], dtype=float)
    body = {"quantity": args.quantity, "model": model.name, "point": point.tolist()}
    if variance is None:
        body["value"] = float(values)
    else:
        tv = G.TensorValue(variance, values)
        body.update(json.loads(tv.to_json(point, model.name)))
        body["values"] = values.tolist()
    body["conventions_version"] = CONVENTIONS_VERSION
    if args.format == "csv":
        rows = [[args.quantity, "-".join(map(str, i)), repr(float(v))]
                for i, v in np.ndenumerate(values)]
        _emit(_csv(rows, ["quantity", "index", "value"]), args.out)
    else:
        _emit(json.dumps(body, indent=2), args.out)
    return EXIT_OK


def _integral(model, quantity: str, resolution: int) -> float:
    rule = Qd.build_rule(model, resolution)
    if quantity == "vol":
        return Qd.volume(model, rule)
    if quantity == "F":
        return functional_F(model, model, rule)

    def field(s):
        p = pack(s)
        w2 = G.norm2(s, p.weyl).value
        return {"Q": p.q.value, "Q+W2/4": p.q.value + 0.25 * w2, "W2": w2}[quantity]

    return Qd.integrate_scalar(model, rule, field, depends_on=model.metric_depends_on)


def cmd_integrate(args) -> int:
    if args.quantity not in _INTEGRALS:
        raise ArgumentError(f"unknown integral {args.quantity!r}; choose from {', '.join(_INTEGRALS)}")
    model = get_model(args.model)
    res = args.resolution or 12
    v1 = _integral(model, args.quantity, res)
    v2 = _integral(model, args.quantity, 2 * res)
    body = {"quantity": args.quantity, "model": model.name, "value": v1, "resolution": res,
            "convergence_delta": abs(v2 - v1) / max(1.0, abs(v1)),
            "conventions_version": CONVENTIONS_VERSION}
    if args.format == "csv":
        _emit(_csv([[body[k] for k in ("quantity", "model", "value", "resolution",
                                       "convergence_delta")]],
                   ["quantity", "model", "value", "resolution", "convergence_delta"]), args.out)
    else:
        _emit(json.dumps(body, indent=2), args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    config = RunConfig(seed=args.seed, resolution=args.resolution, eps=args.eps)

    def progress(rep):
        if not args.quiet:
            print(rep.line(), file=sys.stderr, flush=True)

    reports = run_suite(args.filter, config, progress=progress)
    text = (reports_to_csv(reports, timing=args.timing) if args.format == "csv"
            else reports_to_json(reports, config, timing=args.timing))
    _emit(text, args.out)
    failed = sum(not r.passed for r in reports)
    print(f"{len(reports) - failed}/{len(reports)} checks passed", file=sys.stderr)
    return EXIT_OK if failed == 0 else EXIT_FAIL


_DEFAULT_T = "0,0.05,0.1,0.15,0.2,0.25,0.3"


def cmd_sweep(args) -> int:
    grid = _floats(args.point or _DEFAULT_T, "--point")
    res = args.resolution or 12
    if args.format == "json":
        body = {"conventions_version": CONVENTIONS_VERSION, "resolution": res,
                "rows": sweep_rows(grid, res)}
        _emit(json.dumps(body, indent=2), args.out)
    else:
        text = counterexample_sweep(grid, None, res)
        _emit(text, args.out)
    return EXIT_OK


def cmd_list_models(args) -> int:
    models = list_models()
    if args.format == "csv":
        rows = [[m["id"], m["dim"], m["kind"], m["einstein_lambda"], m["volume"]] for m in models]
        _emit(_csv(rows, ["id", "dim", "kind", "einstein_lambda", "volume"]), args.out)
    else:
        _emit(json.dumps({"conventions_version": CONVENTIONS_VERSION, "models": models},
                         indent=2, default=str), args.out)
    return EXIT_OK


# --- parser ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qgeom", description="Q-curvature geometry engine")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, formats=("json", "csv")):
        p.add_argument("--format", choices=formats, default=formats[0])
        p.add_argument("--out", help="write output to this path instead of stdout")
        return p

    p = common(sub.add_parser("compute", help="pointwise curvature quantity"))
    p.add_argument("--model", required=True)
    p.add_argument("--quantity", default="Q", help=", ".join(_POINT_QUANTITIES))
    p.add_argument("--point", help="comma-separated chart coordinates")
    p.add_argument("--seed", type=int, default=0, help="seed for the default point")
    p.set_defaults(func=cmd_compute)

    p = common(sub.add_parser("integrate", help="integral by tensor-product quadrature"))
    p.add_argument("--model", required=True)
    p.add_argument("--quantity", default="vol", help=", ".join(_INTEGRALS))
    p.add_argument("--resolution", type=int)
    p.set_defaults(func=cmd_integrate)

    p = common(sub.add_parser("verify", help="run the verification suite"))
    p.add_argument("--filter", help="group, check id or id prefix (comma-separated)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--resolution", type=int, help="override quadrature resolutions")
    p.add_argument("--eps", type=float, help="override finite-difference steps")
    p.add_argument("--timing", action="store_true", help="include runtime_ms in the output")
    p.add_argument("--quiet", action="store_true", help="no per-check lines on stderr")
    p.set_defaults(func=cmd_verify)

    p = common(sub.add_parser("sweep", help="counterexample family table"), ("csv", "json"))
    p.add_argument("--point", help=f"comma-separated t values (default {_DEFAULT_T})")
    p.add_argument("--resolution", type=int)
    p.set_defaults(func=cmd_sweep)

    p = common(sub.add_parser("list-models", help="registered model manifolds"))
    p.set_defaults(func=cmd_list_models)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ArgumentError, DomainError, PreconditionError, SingularValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
