"""``jetsec`` command line: build, eval, check, factorize, plot.

Exit codes: 0 success, 1 input validation, 2 numeric failure, 3 DSL parse error.
Data goes to stdout, messages to stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from .decomposition import Factorization, FactorizationError, compose_factorization, factorize
from .dsl_parser import DslEvalError, DslSyntaxError, NotADiffeoError, UnknownFunctionError, validate_diffeo
from .extension_ops import FamilyError, PiecewiseDiffeo, extend_integers, family_from_jetfile
from .jet_core import JetError
from .smooth_expr import ExprError, InversionError, SmoothExpr, from_dict
from .verify_harness import check_section, run_paper_property_suite

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_PARSE = 0, 1, 2, 3


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def fmt(v) -> str:
    return format(float(v), ".17g")


def _read_json(path: str):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise CliError(f"{path}: {exc.strerror}", EXIT_INPUT) from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: malformed JSON at line {exc.lineno} column {exc.colno} (char {exc.pos}): {exc.msg}", EXIT_INPUT) from None


def _write(path: str, text: str):
    if path == "-":
        sys.stdout.write(text + "\n")
        return
    with open(path, "w") as fh:
        fh.write(text + "\n")


def load_diffeo(path: str) -> SmoothExpr:
    """A serialized expression, or a factorization file (recomposed)."""
    d = _read_json(path)
    if isinstance(d, dict) and "residual" in d and "kind" not in d:
        return compose_factorization(Factorization.from_dict(d))
    return from_dict(d)


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("JETSEC_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise CliError(f"JETSEC_SEED must be an integer, got {env!r}", EXIT_INPUT) from None


# -- commands -----------------------------------------------------------------

def cmd_build(args) -> int:
    fam = family_from_jetfile(_read_json(args.jetfile))
    diffeo = extend_integers(fam)
    _write(args.out, json.dumps(diffeo.to_dict(), allow_nan=False))
    A, B = fam.window
    print(f"window [{A}, {B}] compactly_supported={str(fam.is_compactly_supported()).lower()} out={args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    e = load_diffeo(args.file)
    x = args.at
    if not math.isfinite(x):
        raise CliError("--at must be finite", EXIT_INPUT)
    if args.inverse:
        print(fmt(e.inverse_eval(x)))
    elif args.order is not None:
        if args.order < 0:
            raise CliError("--order must be non-negative", EXIT_INPUT)
        print(" ".join(fmt(d) for d in e.jet(x, args.order).derivs))
    else:
        print(fmt(e.eval(x)))
    return EXIT_OK


def cmd_check(args) -> int:
    e = load_diffeo(args.file)
    fam = family_from_jetfile(_read_json(args.jetfile))
    report = check_section(e, fam, args.tol)
    if not args.no_suite:
        report.checks.extend(run_paper_property_suite(_seed(args)).checks)
    print(report.to_json(indent=2) if args.json else report.to_table())
    return EXIT_OK if report.all_passed else EXIT_INPUT


def cmd_factorize(args) -> int:
    A, B = args.window
    if args.fn is not None:
        h = validate_diffeo(args.fn, (A - 1, B + 1), args.samples)
    else:
        h = load_diffeo(args.diffeo)
    fac = factorize(h, args.r, (A, B))
    _write(args.out, fac.to_json())
    if args.recompose:
        back = compose_factorization(fac)
        xs = np.linspace(A, B, 1002)[1:-1]
        err = max(abs(back.eval(float(x)) - h.eval(float(x))) for x in xs)
        print(f"sup_roundtrip_error {fmt(err)}")
        print(f"membership_error {fmt(fac.membership_error())}")
    return EXIT_OK


def cmd_plot(args) -> int:
    e = load_diffeo(args.file)
    if args.samples < 1:
        raise CliError("--samples must be positive", EXIT_INPUT)
    a, b = args.range
    xs = np.linspace(a, b, args.samples)
    k = args.derivative
    out = sys.stdout if args.csv == "-" else open(args.csv, "w", newline="")
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["x", "value"])
        for x in xs:
            x = float(x)
            v = e.eval(x) if not k else e.jet(x, k).derivs[k]
            w.writerow([fmt(x), fmt(v)])
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="jetsec", description="Smooth diffeomorphisms of the line with prescribed jets.")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="extend a jet file to a diffeomorphism")
    b.add_argument("jetfile")
    b.add_argument("-o", "--out", required=True)
    b.set_defaults(func=cmd_build)

    e = sub.add_parser("eval", help="evaluate a serialized diffeomorphism")
    e.add_argument("file")
    e.add_argument("--at", type=float, required=True)
    g = e.add_mutually_exclusive_group()
    g.add_argument("--order", type=int)
    g.add_argument("--inverse", action="store_true")
    e.set_defaults(func=cmd_eval)

    c = sub.add_parser("check", help="verify jets and run the property suite")
    c.add_argument("file")
    c.add_argument("jetfile")
    c.add_argument("--tol", type=float, default=1e-9)
    c.add_argument("--seed", type=int)
    c.add_argument("--no-suite", action="store_true")
    c.add_argument("--json", action="store_true")
    c.set_defaults(func=cmd_check)

    f = sub.add_parser("factorize", help="split into integer jets and a jet-trivial residual")
    src = f.add_mutually_exclusive_group(required=True)
    src.add_argument("--fn", help='expression in x, e.g. "x + 0.25*tanh(x)"')
    src.add_argument("--diffeo", help="serialized diffeomorphism file")
    f.add_argument("--r", type=int, required=True)
    f.add_argument("--window", type=int, nargs=2, metavar=("A", "B"), required=True)
    f.add_argument("--samples", type=int, default=64)
    f.add_argument("-o", "--out", required=True)
    f.add_argument("--recompose", action="store_true")
    f.set_defaults(func=cmd_factorize)

    pl = sub.add_parser("plot", help="write CSV samples")
    pl.add_argument("file")
    pl.add_argument("--range", type=float, nargs=2, metavar=("A", "B"), required=True)
    pl.add_argument("--samples", type=int, default=200)
    pl.add_argument("--csv", required=True)
    pl.add_argument("--derivative", type=int, default=0)
    pl.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (DslSyntaxError, UnknownFunctionError) as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (InversionError, DslEvalError, OverflowError, ZeroDivisionError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FamilyError, NotADiffeoError, FactorizationError, JetError, ExprError, ValueError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
