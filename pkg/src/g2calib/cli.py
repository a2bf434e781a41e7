"""Command-line front end: ``g2calib classify|verify|deform``.

Reports are JSON on stdout (or ``--out``).  They contain no timings, so
the same inputs and seed give byte-identical output.

Exit codes: 0 success; 1 malformed input or unusable spec; 2 degenerate
frame (classify); 3 a check failed (verify, deform).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from fractions import Fraction

import numpy as np

from .lab import NotNormalError, SpecMismatchError, UnknownSpecError, run_deformation
from .planes import DegenerateFrameError, Frame, classify_plane
from .verify import run_identity_suite

EXIT_OK, EXIT_INPUT, EXIT_DEGENERATE, EXIT_FAILED = 0, 1, 2, 3


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _finite(obj):
    """Replace non-finite floats by None so the output is strict JSON."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


def _emit(report: dict, out: str | None):
    text = json.dumps(_finite(report), indent=2, allow_nan=False) + "\n"
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _read_json(path: str):
    try:
        if path == "-":
            return json.load(sys.stdin)
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON in {path}: {exc.msg} (line {exc.lineno})") from exc


def _number(x, exact: bool):
    if isinstance(x, bool) or not isinstance(x, (int, float, str)):
        raise InputError(f"not a number: {x!r}")
    try:
        value = Fraction(x) if isinstance(x, (int, str)) else x
    except (ValueError, ZeroDivisionError) as exc:
        raise InputError(f"not a number: {x!r}") from exc
    if exact:
        return Fraction(value)
    value = float(value)
    if not math.isfinite(value):
        raise InputError("frame entries must be finite")
    return value


def parse_frame(data, exact: bool) -> Frame:
    vectors = data.get("vectors") if isinstance(data, dict) else None
    if not isinstance(vectors, list) or len(vectors) not in (3, 4):
        raise InputError("a frame is {\"vectors\": [...]} with 3 or 4 vectors")
    if not all(isinstance(v, list) and len(v) == 7 for v in vectors):
        raise InputError("each frame vector needs 7 numbers")
    rows = [[_number(x, exact) for x in v] for v in vectors]
    return Frame.of([np.array(r, dtype=object if exact else float) for r in rows])


def cmd_classify(args) -> int:
    exact = (args.backend or "exact") == "exact"
    frame = parse_frame(_read_json(args.input), exact)
    tol = 1e-9 if args.tolerance is None else args.tolerance
    try:
        pc = classify_plane(frame, tol=tol)
    except DegenerateFrameError as exc:
        print(f"degenerate frame: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    _emit(pc.to_json(), args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    try:
        report = run_identity_suite(
            seed=args.seed,
            samples=args.samples,
            tolerance=1e-9 if args.tolerance is None else args.tolerance,
            backend=args.backend or "exact",
        )
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    _emit(report.to_json(), args.out)
    return EXIT_OK if report.all_passed else EXIT_FAILED


def cmd_deform(args) -> int:
    if (args.backend or "float") != "float":
        raise InputError("deform runs in floating point only")
    data = _read_json(args.input)
    if isinstance(data, dict) and args.tolerance is not None:
        data = dict(data, tolerance=args.tolerance)
    try:
        report = run_deformation(data)
    except (UnknownSpecError, NotNormalError, SpecMismatchError, ValueError, KeyError, TypeError) as exc:
        raise InputError(str(exc)) from exc
    out = report.to_json(dump_points=args.dump_points)
    out["seed"] = args.seed
    _emit(out, args.out)
    return EXIT_OK if report.passed else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    common.add_argument("--samples", type=int, default=1000, help="random samples per identity")
    common.add_argument("--tolerance", type=float, default=None, help="pass/fail threshold")
    common.add_argument("--backend", choices=("exact", "float"), default=None,
                        help="arithmetic backend (classify, verify: exact; deform: float)")
    common.add_argument("--out", metavar="PATH", default=None, help="write the JSON report here")
    common.add_argument("--dump-points", action="store_true", help="include per-grid-point values")

    parser = _Parser(prog="g2calib", description="G2 calibration checks and deformation experiments")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    p = sub.add_parser("classify", parents=[common], help="classify a 3- or 4-frame")
    p.add_argument("input", help="frame JSON file, or - for stdin")
    p.set_defaults(func=cmd_classify)
    p = sub.add_parser("verify", parents=[common], help="run the identity suite")
    p.set_defaults(func=cmd_verify)
    p = sub.add_parser("deform", parents=[common], help="run a deformation experiment")
    p.add_argument("input", help="deformation spec JSON file, or - for stdin")
    p.set_defaults(func=cmd_deform)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
