"""Command-line front end.

Exit codes: 0 success, 2 usage or invalid options, 3 unreadable or invalid
data, 4 solver did not reach optimality.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import __version__
from .conic import SolverSettings
from .core import (
    AdditiveModel,
    assign_score,
    learning_set_from_dict,
    load_json,
    load_model,
    read_alternatives_csv,
    save_model,
)
from .errors import DataError, DomainError, ModeError, PolyUtaError, SpecError
from .learn import FitSpec, fit, problem_size
from .metrics import Ranking

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_SOLVER = 0, 2, 3, 4

# the CLI reports ties at the tolerance used for zero-slack checks
CLI_TIE_TOL = 1e-6


class UsageError(Exception):
    pass


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _int_list(text: str) -> list[int]:
    """``3``, ``1,2,5`` or an inclusive range ``0:9``."""
    out: list[int] = []
    try:
        for part in text.split(","):
            if ":" in part:
                lo, hi = (int(v) for v in part.split(":"))
                if hi < lo:
                    raise ValueError
                out.extend(range(lo, hi + 1))
            else:
                out.append(int(part))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from None
    return out


def _add_spec_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--form", choices=["linear", "poly", "spline"], required=True)
    p.add_argument("--degree", type=_positive_int, default=None, help="polynomial degree (poly/spline)")
    p.add_argument("--pieces", type=_positive_int, default=1)
    p.add_argument("--continuity", type=int, default=None, help="spline continuity order (default degree-1)")
    p.add_argument("--scope", choices=["global", "interval"], default="interval")
    p.add_argument("--eps", type=float, default=1e-4, help="margin for strict preferences")
    p.add_argument("--prescale", choices=["auto", "on", "off"], default="auto")
    p.add_argument("--tol", type=float, default=1e-7)
    p.add_argument("--max-iter", type=_positive_int, default=200)


def _spec_from_args(args) -> FitSpec:
    settings = SolverSettings(tol=args.tol, max_iter=args.max_iter)
    prescale = {"auto": None, "on": True, "off": False}[args.prescale]
    common = dict(eps_strict=args.eps, prescale=prescale, settings=settings)
    if args.form == "linear":
        if args.degree not in (None, 1):
            raise SpecError("linear marginals have degree 1")
        spec = FitSpec.linear(args.pieces, **common)
    elif args.form == "poly":
        if args.degree is None:
            raise SpecError("--degree is required for poly")
        if args.pieces != 1:
            raise SpecError("poly marginals have one piece; use --form spline")
        spec = FitSpec.poly(args.degree, args.scope, **common)
    else:
        if args.degree is None:
            raise SpecError("--degree is required for spline")
        if args.scope != "interval":
            raise SpecError("spline pieces are certified on their sub-intervals only")
        spec = FitSpec.spline(args.degree, args.pieces, args.continuity, **common)
    if getattr(args, "categories", None) is not None:
        spec = FitSpec(**{**spec.__dict__, "categories": args.categories})
    return spec.validate()


def _emit_csv(rows: list[list], out) -> None:
    w = csv.writer(out, lineterminator="\n")
    for r in rows:
        w.writerow(r)


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else v


# -- subcommands ------------------------------------------------------------


def cmd_fit(args, out) -> int:
    spec = _spec_from_args(args)
    names, alts = read_alternatives_csv(args.data)
    ls = learning_set_from_dict(load_json(args.prefs), alts, names)
    result = fit(ls, spec)
    diag = result.diagnostics()
    if result.ok and args.out:
        save_model(result.model, args.out)
    if args.format == "json":
        payload = result.to_dict()
        out.write(json.dumps(payload, indent=2, default=_json_default) + "\n")
    else:
        keys = ["status", "spec", "total_slack", "objective", "iterations", "constraints", "variables"]
        _emit_csv([keys, [_fmt(diag[k]) for k in keys]], out)
    if not result.ok:
        print(f"solver stopped with status {diag['status']}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(type(o).__name__)


def _model_and_data(args) -> tuple[AdditiveModel, list]:
    model = load_model(args.model)
    names, alts = read_alternatives_csv(args.data)
    ids = [c.id for c in model.criteria]
    if names != ids:
        raise DataError(f"data columns {names} do not match model criteria {ids}")
    for a in alts:
        for c, x in zip(model.criteria, a.performances):
            if not c.contains(x):
                raise DomainError(f"alternative {a.id!r}: {x} outside [{c.lower}, {c.upper}] on {c.id!r}")
    return model, alts


def cmd_rank(args, out) -> int:
    model, alts = _model_and_data(args)
    if not alts:
        raise DataError("no alternatives to rank")
    scores = model.scores([a.performances for a in alts])
    ranking = Ranking.from_scores([a.id for a in alts], scores, args.tie_tol)
    pos = ranking.positions()
    by_id = dict(zip((a.id for a in alts), scores))
    rows = [(a, by_id[a], pos[a] + 1) for a in ranking.ids()]
    if args.format == "json":
        out.write(json.dumps([{"id": a, "score": float(s), "rank": r} for a, s, r in rows], indent=1) + "\n")
    else:
        _emit_csv([["id", "score", "rank"]] + [[a, _fmt(s), r] for a, s, r in rows], out)
    return EXIT_OK


def cmd_sort(args, out) -> int:
    model, alts = _model_and_data(args)
    if model.thresholds is None:
        raise ModeError("model has no category thresholds; fit it from assignment examples")
    scores = model.scores([a.performances for a in alts])
    rows = [(a.id, s, assign_score(model.thresholds, s)) for a, s in zip(alts, scores)]
    if args.format == "json":
        out.write(json.dumps([{"id": a, "score": float(s), "category": h} for a, s, h in rows], indent=1) + "\n")
    else:
        _emit_csv([["id", "score", "category"]] + [[a, _fmt(s), h] for a, s, h in rows], out)
    return EXIT_OK


def cmd_curves(args, out) -> int:
    if args.samples < 2:
        raise UsageError("--samples must be at least 2")
    model = load_model(args.model)
    rows = []
    for c, m in zip(model.criteria, model.marginals):
        xs = np.linspace(c.lower, c.upper, args.samples)
        xs[-1] = c.upper
        for x, v in zip(xs, m.value(xs)):
            rows.append((c.id, float(x), float(v)))
    if args.format == "json":
        out.write(json.dumps([{"criterion": c, "x": x, "value": v} for c, x, v in rows], indent=1) + "\n")
    else:
        _emit_csv([["criterion", "x", "value"]] + [[c, _fmt(x), _fmt(v)] for c, x, v in rows], out)
    return EXIT_OK


def cmd_size(args, out) -> int:
    try:
        cons, var = problem_size(args.m, args.n, args.pieces, args.degree, args.continuity)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.format == "json":
        out.write(json.dumps({"constraints": cons, "variables": var}) + "\n")
    else:
        out.write(f"{cons},{var}\n")
    return EXIT_OK


def cmd_experiment(args, out) -> int:
    from .synth import grid_configs, results_csv, results_json, summarize, sweep, zoo_ids

    spec = _spec_from_args(args)
    known = set(zoo_ids())
    bad = [i for i in args.model_id if i not in known]
    if bad:
        raise UsageError(f"unknown model ids {bad}; choose from {sorted(known)}")
    if any(s < 0 for s in args.seed):
        raise UsageError("seeds must be non-negative")
    if any(not 2 <= ms <= args.m for ms in args.mstar):
        raise UsageError(f"every --mstar must lie in [2, {args.m}]")
    configs = grid_configs(args.model_id, args.seed, args.mstar, [spec], m=args.m)
    results = sweep(configs, workers=args.workers)
    if args.format == "json":
        out.write(results_json(results, timing=not args.no_timing) + "\n")
    else:
        out.write(results_csv(results, timing=not args.no_timing, header=args.header))
    if args.summary:
        for row in summarize(results):
            print(json.dumps(row), file=sys.stderr)
    return EXIT_SOLVER if any(not r.ok for r in results) else EXIT_OK


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="polyuta", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def with_format(sp, default="csv"):
        sp.add_argument("--format", choices=["csv", "json"], default=default)
        return sp

    f = with_format(sub.add_parser("fit", help="learn a model from preference statements"), "json")
    f.add_argument("--data", required=True, help="alternatives CSV (id column, then one column per criterion)")
    f.add_argument("--prefs", required=True, help="learning-set JSON (prefer / indiff / assign)")
    f.add_argument("--out", help="where to write the model JSON")
    f.add_argument("--categories", type=_positive_int, default=None, help="number of categories when sorting")
    _add_spec_args(f)
    f.set_defaults(func=cmd_fit)

    for name, func, text in (("rank", cmd_rank, "score and rank alternatives"), ("sort", cmd_sort, "assign categories")):
        r = with_format(sub.add_parser(name, help=text))
        r.add_argument("--model", required=True)
        r.add_argument("--data", required=True)
        if name == "rank":
            r.add_argument("--tie-tol", type=float, default=CLI_TIE_TOL)
        r.set_defaults(func=func)

    c = with_format(sub.add_parser("curves", help="sample the marginal value functions"))
    c.add_argument("--model", required=True)
    c.add_argument("--samples", type=int, default=101)
    c.set_defaults(func=cmd_curves)

    s = with_format(sub.add_parser("size", help="constraint and variable counts of a spline program"))
    s.add_argument("--m", type=int, required=True, help="learning-set size")
    s.add_argument("--n", type=int, required=True, help="number of criteria")
    s.add_argument("--pieces", type=int, default=1)
    s.add_argument("--degree", type=int, default=1)
    s.add_argument("--continuity", type=int, default=0)
    s.set_defaults(func=cmd_size)

    e = with_format(sub.add_parser("experiment", help="learn from a synthetic decision maker and score the fit"))
    e.add_argument("--model-id", type=_int_list, required=True, help="zoo model ids, e.g. 1 or 1:4")
    e.add_argument("--seed", type=_int_list, default=[0], help="seeds, e.g. 0:9")
    e.add_argument("--mstar", type=_int_list, default=[100], help="learning-set sizes")
    e.add_argument("--m", type=_positive_int, default=1000, help="test-set size")
    e.add_argument("--workers", type=_positive_int, default=1)
    e.add_argument("--header", action="store_true", help="print the CSV header row")
    e.add_argument("--no-timing", action="store_true", help="leave the seconds column empty")
    e.add_argument("--summary", action="store_true", help="also print per-group means to stderr")
    _add_spec_args(e)
    e.set_defaults(func=cmd_experiment)
    return p


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args, out)
    except (UsageError, SpecError, ModeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, DomainError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except PolyUtaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
