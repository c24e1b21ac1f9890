"""Command-line entry point.

Every subcommand prints a JSON document on stdout and optionally writes it
(or a CSV table) with ``--out``.  Exit status: 0 success, 1 a verification
check failed, 2 usage or configuration error.  Relative output paths are
resolved against ``$CIRCLEGROUPS_OUTDIR`` when it is set.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import dynamics, gallery, germs, renorm, rotation, theorem12
from .core import Arc, GroupPresentation, Linear, LineMobius, Polynomial

OUTDIR_ENV = "CIRCLEGROUPS_OUTDIR"
DOMAIN_ERRORS = (dynamics.PreconditionError, dynamics.BudgetExceeded, germs.GermError,
                 renorm.HypothesisError, renorm.CauchyError, renorm.DivergenceError,
                 renorm.FlowExitError, rotation.IterationBudgetError, theorem12.BracketError,
                 gallery.NonzeroRotationError)


class UsageError(Exception):
    pass


# -- output ------------------------------------------------------------------------------


def _clean(obj):
    """Round floats to 15 significant digits and make everything JSON-native."""
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return str(x)
        return float(f"{x:.15g}")
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2) + "\n"


def _out_path(out):
    if out is None:
        return None
    p = Path(out)
    base = os.environ.get(OUTDIR_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _fmt(x):
    return f"{x:.15g}" if isinstance(x, (float, np.floating)) else str(x)


def write_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    Path(path).write_text(buf.getvalue())


def emit(args, doc, csv_table=None):
    text = dumps(doc)
    sys.stdout.write(text)
    path = _out_path(args.out)
    if path is not None:
        if csv_table is not None and path.suffix == ".csv":
            write_csv(path, *csv_table)
        else:
            path.write_text(text)


def _all_true(d) -> bool:
    return all(bool(v) for v in d.values())


# -- inputs --------------------------------------------------------------------------------


def _load_group(path) -> tuple[GroupPresentation, dict]:
    if path is None:
        raise UsageError("--config is required")
    try:
        entry = gallery.load_config(path)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read configuration {path}: {exc}") from exc
    except (KeyError, ValueError, TypeError) as exc:
        raise UsageError(f"bad configuration {path}: {exc}") from exc
    return entry.group, entry.config


def _floats(text, n=None):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from exc
    if n is not None and len(vals) != n:
        raise UsageError(f"expected {n} numbers, got {text!r}")
    return vals


def _ints(text):
    try:
        return [int(v) for v in text.split(",")]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from exc


def _word(group, text):
    try:
        return group.parse_word(text)
    except KeyError as exc:
        raise UsageError(str(exc)) from exc


# -- subcommands -----------------------------------------------------------------------------


def cmd_rotnum(args):
    group, _ = _load_group(args.config)
    F = group.word_map(_word(group, args.word))
    est = rotation.rotation_number(F, args.iters, args.x0)
    doc = {"word": args.word, "value": est.value, "error_bound": est.error_bound,
           "iterations": est.iterations, "translation": est.translation}
    cert = rotation.detect_rational(F, max_q=args.max_q) if args.max_q else None
    doc["rational"] = None if cert is None else {
        "p": cert.p, "q": cert.q, "orbit": cert.orbit, "residual": cert.residual}
    emit(args, doc)
    return 0


def cmd_classify(args):
    group, _ = _load_group(args.config)
    c = dynamics.classify(group, depth=args.depth, epsilon=args.epsilon)
    emit(args, c.to_dict())
    return 0


def cmd_contract(args):
    group, _ = _load_group(args.config)
    start, length = _floats(args.arc, 2)
    w = dynamics.find_contraction(group, Arc(start, length), args.target,
                                  max_word_len=args.max_word_len, budget=args.budget)
    doc = {"arc": [start, length], "target_length": args.target, "found": w is not None,
           "witness": None if w is None else w.to_dict(group)}
    emit(args, doc)
    return 0 if w is not None else 1


def cmd_theta(args):
    group, _ = _load_group(args.config)
    est = dynamics.estimate_theta(group, grid_size=args.grid, word_budget=args.budget,
                                  threads=args.threads)
    emit(args, est.to_dict(), (["x", "theta"], est.samples))
    return 0


def cmd_pin(args):
    group, _ = _load_group(args.config)
    start, length = _floats(args.arc, 2)
    arc = Arc(start, length)
    theta = None
    if args.kappa > 1:
        theta = dynamics.estimate_theta(group, grid_size=args.grid, word_budget=args.budget,
                                        threads=args.threads)
    w = dynamics.find_pinning_element(group, arc, args.kappa, theta, word_budget=args.budget)
    ok, why = dynamics.check_pinning(group.word_map(w), [arc] if args.kappa == 1 else
                                     dynamics._theta_arcs(arc, args.kappa, theta))
    doc = {"word": group.format_word(w), "arc": [start, length], "kappa": args.kappa,
           "checks": {"pinning_fixed_points_and_sweep": ok}, "detail": why}
    emit(args, doc)
    return 0 if ok else 1


def cmd_koenigs(args):
    group, _ = _load_group(args.config)
    F = group.word_map(_word(group, args.word))
    chart = germs.koenigs_chart(F, args.point, args.radius, n_grid=args.grid)
    xs = chart.xs
    defect = chart.defect()
    round_trip = float(np.max(np.abs(chart.phi_inv(chart.phi(xs)) - xs)))
    doc = {"point": args.point, "multiplier": chart.lam, "interval": list(chart.interval),
           "defect": defect, "round_trip": round_trip,
           "checks": {"linearization_defect_small": defect <= args.tol,
                      "round_trip_small": round_trip <= args.tol}}
    emit(args, doc, (["x", "phi"], chart.to_rows()))
    return 0 if _all_true(doc["checks"]) else 1


def _fixture_sequence(name):
    if name == "nakai":
        seq = renorm.make_nakai_sequence(LineMobius(1, 0, 1, 1), Polynomial([0, 1, 0, 1]),
                                         interval=(0.2, 0.6), limit=lambda x: np.asarray(x) ** 2)
        return seq, (0.2, 0.6), 0.5, [10, 100, 1000]
    if name == "hyperbolic":
        seq = renorm.make_hyperbolic_sequence(Linear(0.5), Polynomial([0, 1, -1]))
        return seq, (0.25, 0.5), 0.5, [4, 6, 8, 10, 12]
    raise UsageError(f"unknown fixture {name!r}")


def cmd_renorm(args):
    if args.fixture == "prop39":
        n_list = _ints(args.n_list) if args.n_list else list(range(5, 51))
        seq, rep = renorm.prop39_pipeline(0.5, renorm.affine_flow_family(), n_list, grid=args.grid)
        rows = [[r.n, r.k, r.scaled_min, r.scaled_max, r.scaled_deriv_max, r.conjugation_defect]
                for r in rep.rows]
        doc = rep.to_dict()
        doc["checks"] = {"selection_and_scaled_bounds_hold": rep.ok}
        emit(args, doc, (["n", "k", "scaled_min", "scaled_max", "scaled_deriv_max",
                          "conjugation_defect"], rows))
        return 0 if rep.ok else 1
    if args.fixture is not None:
        seq, J0, t0, default_n = _fixture_sequence(args.fixture)
    else:
        group, cfg = _load_group(args.config)
        if "renorm" not in cfg:
            raise UsageError("configuration has no renorm section")
        entry = gallery.GalleryEntry(cfg.get("name", "config"), group, cfg.get("expected", {}), cfg)
        seq = gallery.gstar_sequence(entry)
        lo, hi = seq.interval
        J0, t0 = (lo + 0.1 * (hi - lo), lo + 0.3 * (hi - lo)), 1.0
        default_n = [4, 8, 16, 32]
    if args.t0 is not None:
        t0 = args.t0
    if args.J0:
        J0 = tuple(_floats(args.J0, 2))
    n_list = _ints(args.n_list) if args.n_list else default_n
    hyp = renorm.validate_lemma34_hypotheses(seq, n_list, grid=args.grid)
    fl = renorm.verify_flow_approximation(seq, J0, t0, n_list, grid=args.grid)
    doc = {"kind": seq.kind, "exponents": seq.exponents, "hypotheses": hyp.to_dict(),
           "flow": fl.to_dict(),
           "checks": {"scaled_displacement_bounded_away_from_zero_and_infinity": hyp.ok,
                      "flow_error_decreasing": fl.decreasing}}
    rows = [[r["n"], r["iterations"], r["error"]] for r in fl.rows]
    emit(args, doc, (["n", "iterations", "error"], rows))
    return 0 if _all_true(doc["checks"]) else 1


def run_thm12(entry: gallery.GalleryEntry, count=None, threads: int = 1):
    c = entry.config.get("construction", {})
    seq = gallery.gstar_sequence(entry)
    setup = theorem12.build_setup(entry.group, seq, I0=c.get("I0"), t0=c.get("t0"),
                                  h=c.get("h"))
    T = theorem12.compute_T(setup)
    count = c.get("count", 5) if count is None else count
    fam = theorem12.manufacture_family(setup, T, count,
                                       window_fraction=c.get("window_fraction", 0.5),
                                       threads=threads)
    checks = dict(setup.checks)
    doc = {"setup": setup.to_dict(), "T": T, "family": fam.to_dict(entry.group)}
    if count > 0:
        rep = theorem12.verify_lemma42(fam, threshold=c.get("threshold", 0.05))
        doc["rotation_numbers"] = rep.to_dict()
        checks.update(rep.checks)
        for m in fam.members:
            for k, v in m.checks.items():
                checks[k] = checks.get(k, True) and v
    doc["checks"] = checks
    return doc


def cmd_thm12(args):
    try:
        entry = gallery.load_config(args.config)
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        raise UsageError(f"cannot read configuration {args.config}: {exc}") from exc
    doc = run_thm12(entry, args.count, args.threads)
    rows = [[m["index"], m["t"], m["n"], m["m"], m["word"], m["rho"], m["error"]]
            for m in doc["family"]["members"]]
    emit(args, doc, (["i", "t", "n", "m", "word", "rho", "error"], rows))
    return 0 if _all_true(doc["checks"]) else 1


def cmd_gallery(args):
    try:
        entry = gallery.load(args.name)
    except KeyError as exc:
        raise UsageError(str(exc)) from exc
    doc = {"name": entry.name, "config": entry.config}
    if args.verify:
        checks = {}
        kind = dynamics.classify(entry.group, depth=args.classify_depth).kind
        checks["classification_matches"] = kind == entry.expected.get("classification")
        doc["classification"] = kind
        if entry.name in ("psl2z", "schottky2"):
            rep = gallery.verify_rho_image(entry, depth=args.depth)
            doc["rho_image"] = rep.to_dict()
            checks["rho_image_within_allowed"] = rep.ok
        elif entry.name == "remark44":
            rep = gallery.verify_remark44(entry, seed=args.seed)
            doc["remark44"] = rep.to_dict()
            checks.update(rep.checks)
            flat = gallery.bump_flatness(entry)
            doc["bump_flatness"] = flat
            checks["bump_field_flat_at_support_ends"] = flat <= 1e-8
        elif entry.name == "gstar":
            rep = gallery.verify_gstar(entry)
            doc["gstar"] = rep
            checks.update(rep["checks"])
        doc["checks"] = checks
        emit(args, doc)
        return 0 if _all_true(checks) else 1
    emit(args, doc)
    return 0


# -- parser --------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    # global flags are accepted before or after the subcommand; the copy on the
    # subparsers suppresses defaults so it never overwrites a value given earlier
    top = argparse.ArgumentParser(add_help=False)
    common = argparse.ArgumentParser(add_help=False)
    for parser, default in ((top, None), (common, argparse.SUPPRESS)):
        parser.add_argument("--seed", type=int, default=0 if default is None else default,
                            help="seed for randomized searches")
        parser.add_argument("--threads", type=int, default=1 if default is None else default)
        parser.add_argument("--out", default=default,
                            help="output file (JSON, or CSV for tables)")

    p = argparse.ArgumentParser(prog="circlegroups", parents=[top],
                                description="Rotation numbers and dynamics of circle groups.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("rotnum", parents=[common], help="rotation number of a word")
    s.add_argument("--config", required=True)
    s.add_argument("--word", required=True)
    s.add_argument("--iters", type=int, default=100_000)
    s.add_argument("--x0", type=float, default=0.0)
    s.add_argument("--max-q", type=int, default=20,
                   help="largest period searched for a rational certificate (0 skips)")
    s.set_defaults(func=cmd_rotnum)

    s = sub.add_parser("classify", parents=[common], help="orbit trichotomy")
    s.add_argument("--config", required=True)
    s.add_argument("--depth", type=int, default=12)
    s.add_argument("--epsilon", type=float, default=0.05)
    s.set_defaults(func=cmd_classify)

    s = sub.add_parser("contract", parents=[common], help="word shrinking an arc")
    s.add_argument("--config", required=True)
    s.add_argument("--arc", required=True, help="start,length")
    s.add_argument("--target", type=float, default=1e-3)
    s.add_argument("--max-word-len", type=int, default=40)
    s.add_argument("--budget", type=int, default=20_000)
    s.set_defaults(func=cmd_contract)

    s = sub.add_parser("theta", parents=[common], help="sampled theta map")
    s.add_argument("--config", required=True)
    s.add_argument("--grid", type=int, default=16)
    s.add_argument("--budget", type=int, default=5000)
    s.set_defaults(func=cmd_theta)

    s = sub.add_parser("pin", parents=[common], help="pinning element for an arc")
    s.add_argument("--config", required=True)
    s.add_argument("--arc", required=True, help="start,length")
    s.add_argument("--kappa", type=int, default=1)
    s.add_argument("--grid", type=int, default=16)
    s.add_argument("--budget", type=int, default=5000)
    s.set_defaults(func=cmd_pin)

    s = sub.add_parser("koenigs", parents=[common], help="linearizing chart (CSV)")
    s.add_argument("--config", required=True)
    s.add_argument("--word", required=True)
    s.add_argument("--point", type=float, default=0.0)
    s.add_argument("--radius", type=float, default=0.25)
    s.add_argument("--grid", type=int, default=512)
    s.add_argument("--tol", type=float, default=1e-9)
    s.set_defaults(func=cmd_koenigs)

    s = sub.add_parser("renorm", parents=[common], help="renormalization tables")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--fixture", choices=["nakai", "hyperbolic", "prop39"])
    src.add_argument("--config")
    s.add_argument("--n-list")
    s.add_argument("--t0", type=float)
    s.add_argument("--J0", help="lo,hi")
    s.add_argument("--grid", type=int, default=512)
    s.set_defaults(func=cmd_renorm)

    s = sub.add_parser("thm12-demo", parents=[common], help="small nonzero rotation numbers")
    s.add_argument("--config", required=True)
    s.add_argument("--count", type=int)
    s.set_defaults(func=cmd_thm12)

    s = sub.add_parser("gallery", parents=[common], help="named example groups")
    s.add_argument("name")
    s.add_argument("--verify", action="store_true")
    s.add_argument("--depth", type=int, default=8, help="word length for rotation-number sampling")
    s.add_argument("--classify-depth", type=int, default=12)
    s.set_defaults(func=cmd_gallery)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        parser.error("--threads must be positive")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"circlegroups: error: {exc}", file=sys.stderr)
        return 2
    except theorem12.RelationError as exc:
        sys.stdout.write(dumps({"error": str(exc), "failed": exc.failed}))
        return 1
    except DOMAIN_ERRORS as exc:
        # a precondition or numerical check failed: report it as a verification failure
        sys.stdout.write(dumps({"error": str(exc), "kind": type(exc).__name__}))
        return 1


if __name__ == "__main__":
    sys.exit(main())
