"""Command line entry point: ``ghostspec <command> ...``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import re
import sys
from pathlib import Path

import numpy as np

from . import oracles, schemas
from .ghosts import analyze_ghost
from .integrator import IntegrationError, integrate
from .problem import ProblemFormatError, SLProblem
from .spectrum import (DEFAULT_RECT, EIGEN_TOL, BoundaryZero, NonConvergence, Rect,
                       full_spectrum_report, newton_refine)
from .verify import summarize, verify_example, verify_random

EXIT_OK, EXIT_INVARIANT, EXIT_INPUT, EXIT_NONCONVERGENCE = 0, 1, 2, 3

_NUM = r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_COMPLEX = re.compile(
    rf"^(?:(?P<re>[+-]?{_NUM})(?:(?P<isign>[+-])(?P<im>{_NUM})?i)?|(?P<osign>[+-]?)(?P<only>{_NUM})?i)$")


class InputError(Exception):
    pass


def parse_complex(text: str) -> complex:
    """Parse ``re+imi`` (e.g. ``26.9376+6.9215i``, ``3.8741i``, ``-2``, ``1-i``)."""
    m = _COMPLEX.match(text.strip().replace(" ", ""))
    if not m:
        raise InputError(f"cannot parse complex number {text!r}; use re+imi")
    if m.group("re") is not None:
        re_part = float(m.group("re"))
        if m.group("isign") is None:
            return complex(re_part, 0.0)
        im = float(m.group("im")) if m.group("im") else 1.0
        return complex(re_part, -im if m.group("isign") == "-" else im)
    im = float(m.group("only")) if m.group("only") else 1.0
    return complex(0.0, -im if m.group("osign") == "-" else im)


def format_complex(z: complex) -> str:
    return f"{z.real:.10g}{z.imag:+.10g}i"


def _floats(text: str, n: int, what: str):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise InputError(f"{what}: {exc}") from exc
    if len(vals) != n:
        raise InputError(f"{what} needs {n} comma-separated numbers")
    return vals


def _rect(text):
    try:
        rect = Rect(*_floats(text, 4, "--box"))
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    if rect.im0 <= 0:
        raise InputError("--box must lie in the open upper half-plane (im0 > 0)")
    return rect


def _positive(name, v):
    if v is not None and not v > 0:
        raise InputError(f"{name} must be positive")
    return v


def load_problem(args) -> tuple[SLProblem, "oracles.OracleProblem | None"]:
    if bool(args.example) == bool(args.problem):
        raise InputError("give exactly one of --example or --problem")
    if args.example:
        try:
            op = oracles.example_problem(args.example)
        except KeyError as exc:
            raise InputError(f"unknown example {args.example!r}") from exc
        return op.problem, op
    try:
        return SLProblem.load(args.problem), None
    except OSError as exc:
        raise InputError(f"cannot read {args.problem}: {exc}") from exc
    except (ProblemFormatError, ValueError) as exc:
        raise InputError(f"{args.problem}: {exc}") from exc


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


# -- commands -------------------------------------------------------------------

def examples_table() -> str:
    lines = []
    for op in oracles.registry():
        lines.append(f"{op.id}  {op.notes}  λ≈{op.quoted_label}")
    return "\n".join(lines) + "\n"


def cmd_examples(args) -> int:
    if args.action != "list":
        raise InputError("usage: examples list")
    sys.stdout.write(examples_table())
    return EXIT_OK


def _tolerances(args):
    return dict(rtol=_positive("--rtol", args.rtol), atol=_positive("--atol", args.atol),
                eigen_tol=_positive("--eigen-tol", args.eigen_tol))


def cmd_solve(args) -> int:
    problem, _ = load_problem(args)
    tol = _tolerances(args)
    rect = _rect(args.box) if args.box else DEFAULT_RECT
    window = tuple(_floats(args.real_window, 2, "--real-window")) if args.real_window else None
    if window and not window[0] < window[1]:
        raise InputError("--real-window needs lo < hi")
    rep = full_spectrum_report(problem, rect, window, **tol)
    d = rep.to_dict()
    schemas.validate(d, schemas.SPECTRUM_SCHEMA, RuntimeError)
    if args.format == "csv":
        rows = [("real", x, 0.0, "", "") for x in rep.real_eigs]
        rows += [("nonreal", p.lam.real, p.lam.imag, p.residual, p.multiplicity_flag)
                 for p in rep.nonreal_pairs]
        _emit(_csv(["kind", "re", "im", "residual", "multiplicity"], rows), args.out)
    else:
        _emit(_json(d), args.out)
    return EXIT_OK if rep.bound_ok else EXIT_INVARIANT


def _ghost_csv_path(args) -> str | None:
    if args.csv:
        return args.csv
    if args.out:
        return str(Path(args.out).with_suffix(".csv"))
    return None


def cmd_analyze(args) -> int:
    problem, _ = load_problem(args)
    tol = _tolerances(args)
    lam = parse_complex(args.lam)
    if lam.imag == 0:
        raise InputError("--lambda must be non-real")
    etol = _positive("--endpoint-tol", args.endpoint_tol)
    try:
        rep = analyze_ghost(problem, lam, eigen_tol=tol["eigen_tol"], endpoint_tol=etol,
                            n_samples=max(args.samples, 1000))
    except ValueError as exc:
        raise NonConvergence(str(exc)) from exc
    d = rep.to_dict()
    schemas.validate(d, schemas.GHOST_SCHEMA, RuntimeError)
    table = _csv(["x", "phi", "psi", "G"], rep.plot_rows(max(args.samples, 1000)))
    if args.format == "csv":
        _emit(table, args.out)
    else:
        _emit(_json(d), args.out)
        path = _ghost_csv_path(args)
        if path:
            Path(path).write_text(table)
    return EXIT_OK if rep.ok else EXIT_INVARIANT


def cmd_plotdata(args) -> int:
    problem, _ = load_problem(args)
    lam = parse_complex(args.lam)
    if args.refine:
        lam, info = newton_refine(problem, lam, args.eigen_tol or EIGEN_TOL)
        if not info.converged:
            raise NonConvergence(f"no eigenvalue near {args.lam}")
    traj = integrate(problem, lam, rtol=args.rtol or 1e-11, atol=1e-300)
    xs = np.linspace(problem.a, problem.b, max(args.samples, 2))
    y, dy = traj.evaluate(xs)
    unit = np.ldexp(1.0, traj.log2_scale)
    y, dy = y * unit, dy * unit
    rows = np.column_stack([xs, y.real, y.imag, dy.real, dy.imag])
    _emit(_csv(["x", "Re y", "Im y", "Re y'", "Im y'"], rows), args.out)
    return EXIT_OK


def _print_result(res, out):
    status = "PASS" if res.ok else "FAIL"
    out.write(f"{status} {res.label} ghosts={res.ghosts}\n")
    for name, ok in res.checks.items():
        detail = res.details.get(name)
        extra = "" if detail is None else f"  {json.dumps(detail, default=str, sort_keys=True)}"
        out.write(f"  {'ok ' if ok else 'BAD'} {name}{extra}\n")
    if res.error:
        out.write(f"  error: {res.error}\n")
    if not res.ok:
        out.write(f"  problem: {json.dumps(res.problem, sort_keys=True)}\n")


def cmd_verify(args) -> int:
    results = []
    if args.all:
        results += [verify_example(e) for e in oracles.EXAMPLE_IDS]
    if args.example:
        if args.example not in oracles.EXAMPLE_IDS:
            raise InputError(f"unknown example {args.example!r}")
        results.append(verify_example(args.example))
    if args.random:
        if args.random < 0:
            raise InputError("--random needs a non-negative count")
        results += verify_random(args.random, args.seed)
    if not results and not args.random:
        raise InputError("give --all, --example or --random")
    buf = io.StringIO()
    for r in results:
        _print_result(r, buf)
    passed, total = summarize(results)
    no_ghost = sum(1 for r in results if r.ok and r.ghosts == 0)
    buf.write(f"{passed}/{total} passed ({no_ghost} with no ghost found)\n")
    _emit(buf.getvalue(), args.out)
    if any(r.error for r in results):
        return EXIT_NONCONVERGENCE
    return EXIT_OK if passed == total else EXIT_INVARIANT


# -- parser --------------------------------------------------------------------------

def _add_problem_args(p):
    p.add_argument("--example", help="built-in example id (exa1..exa4)")
    p.add_argument("--problem", help="problem JSON file")


def _add_tol_args(p):
    p.add_argument("--rtol", type=float, default=1e-10)
    p.add_argument("--atol", type=float, default=1e-12)
    p.add_argument("--eigen-tol", type=float, default=EIGEN_TOL)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ghostspec",
                                 description="Non-real eigenvalues and complex ghosts of "
                                             "indefinite Sturm-Liouville problems.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("examples", help="built-in examples")
    p.add_argument("action", choices=["list"])
    p.set_defaults(func=cmd_examples)

    p = sub.add_parser("solve", help="real and non-real eigenvalues")
    _add_problem_args(p)
    _add_tol_args(p)
    p.add_argument("--box", help="re0,re1,im0,im1 (upper half-plane)")
    p.add_argument("--real-window", help="lo,hi")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--out")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("analyze", help="ghost analysis at an eigenvalue")
    _add_problem_args(p)
    _add_tol_args(p)
    p.add_argument("--lambda", dest="lam", required=True, help="approximate eigenvalue, re+imi")
    p.add_argument("--endpoint-tol", type=float, default=None)
    p.add_argument("--samples", type=int, default=2001)
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--out")
    p.add_argument("--csv", help="where to write the x,phi,psi,G table (JSON mode)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("verify", help="run the invariant suites")
    p.add_argument("--all", action="store_true", help="all built-in examples")
    p.add_argument("--example")
    p.add_argument("--random", type=int, default=0, metavar="N")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("plotdata", help="eigenfunction samples as CSV")
    _add_problem_args(p)
    p.add_argument("--lambda", dest="lam", required=True)
    p.add_argument("--samples", type=int, default=2001)
    p.add_argument("--refine", action="store_true", help="polish lambda by Newton first")
    p.add_argument("--rtol", type=float, default=None)
    p.add_argument("--eigen-tol", type=float, default=None)
    p.add_argument("--format", choices=["csv"], default="csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_plotdata)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NonConvergence, BoundaryZero, IntegrationError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        for d in getattr(exc, "diagnostics", []):
            print(f"  {json.dumps(d, sort_keys=True)}", file=sys.stderr)
        return EXIT_NONCONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
