"""Command-line entry point.

Exit codes: 0 success, 2 invalid input, 3 solver failure, 4 validation
failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import asdict
from pathlib import Path

from .bench import RunReport, bench
from .estimators import ALGORITHMS, make_scheduler
from .exact import ExactBudgetExceeded, build_milp, export_lp
from .generate import PRESET_SCALES, PRESETS, GenerationError, generate
from .model import (
    InstanceError,
    ScheduleError,
    load_instance,
    load_schedule,
    save_schedule,
    validate_schedule,
)

EXIT_OK, EXIT_INPUT, EXIT_SOLVER, EXIT_INVALID = 0, 2, 3, 4


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _int_list(text: str) -> list[int]:
    """``"0-9"``, ``"1,3,5"`` or a mix of both."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out += list(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    return out


def _load(path: str):
    try:
        return load_instance(path)
    except FileNotFoundError:
        raise CliError(f"no such file: {path}", EXIT_INPUT) from None
    except (json.JSONDecodeError, InstanceError, KeyError, TypeError, ValueError) as exc:
        raise CliError(f"invalid instance {path}: {exc}", EXIT_INPUT) from None


def cmd_gen(args: argparse.Namespace) -> int:
    if args.scale not in PRESET_SCALES[args.preset]:
        scales = PRESET_SCALES[args.preset]
        raise CliError(f"scale for {args.preset} must be in {scales[0]}..{scales[-1]}",
                       EXIT_INPUT)
    try:
        P = generate(PRESETS[args.preset](args.scale, args.seed))
    except GenerationError as exc:
        raise CliError(str(exc), EXIT_SOLVER) from None
    text = P.to_json()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _report_csv(report: RunReport) -> str:
    row = asdict(report)
    row["valid"] = "true" if report.valid else "false"
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(row), lineterminator="\n")
    writer.writeheader()
    writer.writerow(row)
    return buf.getvalue()


def cmd_solve(args: argparse.Namespace) -> int:
    P = _load(args.instance)
    if args.validate_only:
        if not args.schedule:
            raise CliError("--validate-only needs --schedule", EXIT_INPUT)
        try:
            M = load_schedule(args.schedule)
        except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise CliError(f"invalid schedule {args.schedule}: {exc}", EXIT_INPUT) from None
        verdict = validate_schedule(P, M)
        for v in verdict:
            print(v, file=sys.stderr)
        print("valid" if verdict.ok else "invalid")
        return EXIT_OK if verdict.ok else EXIT_INVALID

    params = {"budget": args.budget} if args.algo == "exact" else {}
    est = make_scheduler(args.algo, **params)
    try:
        est.fit(P)
    except ExactBudgetExceeded as exc:
        raise CliError(f"exact search budget exhausted ({exc})", EXIT_SOLVER) from None
    except (RuntimeError, MemoryError, ScheduleError) as exc:
        raise CliError(f"{args.algo} failed: {type(exc).__name__}: {exc}", EXIT_SOLVER) from None
    m = est.metrics_
    report = RunReport(args.algo, args.seed, args.scale, len(P.observations), m.reward,
                       m.wall_time, m.message_count, m.message_bytes, est.verdict_.ok)
    if args.trace:
        est.bus_.export_trace(args.trace)
    if not est.verdict_.ok:
        for v in est.verdict_:
            print(v, file=sys.stderr)
        sys.stdout.write(_report_csv(report))
        return EXIT_INVALID
    if args.out:
        save_schedule(est.schedule_, args.out)
    sys.stdout.write(_report_csv(report))
    return EXIT_OK


def cmd_export_lp(args: argparse.Namespace) -> int:
    P = _load(args.instance)
    try:
        model = build_milp(P, priority_boost=args.boost, strict=args.strict)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_INPUT) from None
    export_lp(model, args.out)
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    try:
        scales = _int_list(args.scales)
        seeds = _int_list(args.seeds)
    except ValueError as exc:
        raise CliError(f"bad integer list: {exc}", EXIT_INPUT) from None
    algos = [a.strip() for a in args.algos.split(",") if a.strip()]
    bad = [a for a in algos if a not in ALGORITHMS]
    if bad:
        raise CliError(f"unknown algorithms {bad}", EXIT_INPUT)
    allowed = PRESET_SCALES[args.preset]
    if any(s not in allowed for s in scales):
        raise CliError(f"scales for {args.preset} must be in {allowed[0]}..{allowed[-1]}",
                       EXIT_INPUT)
    summaries = bench(args.preset, scales, seeds, algos, args.out, budget=args.budget)
    for row in summaries:
        print(f"{row['algorithm']:>7} scale {row['scale']}: reward {float(row['reward']):.1f} "
              f"time {float(row['wall_time']):.3f}s msgs {float(row['msg_count']):.0f} "
              f"bytes {float(row['msg_bytes']):.0f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eoscsp",
                                     description="Satellite constellation scheduling with exclusive users")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate an instance")
    g.add_argument("--preset", choices=sorted(PRESETS), required=True)
    g.add_argument("--scale", type=int, default=0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", help="instance JSON path (stdout if omitted)")
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="solve or validate an instance")
    s.add_argument("instance")
    s.add_argument("--algo", choices=sorted(ALGORITHMS), default="greedy")
    s.add_argument("--budget", type=float, default=60.0, help="exact search time budget (s)")
    s.add_argument("--out", help="schedule JSON path")
    s.add_argument("--seed", type=int, default=0, help="seed recorded in the report")
    s.add_argument("--scale", type=int, default=0, help="scale recorded in the report")
    s.add_argument("--validate-only", action="store_true")
    s.add_argument("--schedule", help="schedule to check with --validate-only")
    s.add_argument("--trace", help="write the message trace as JSON lines")
    s.set_defaults(func=cmd_solve)

    e = sub.add_parser("export-lp", help="write the MILP in LP format")
    e.add_argument("instance")
    e.add_argument("--out", required=True)
    e.add_argument("--boost", type=float, default=None)
    e.add_argument("--strict", action="store_true",
                   help="also keep foreign observations out of exclusive windows")
    e.set_defaults(func=cmd_export_lp)

    b = sub.add_parser("bench", help="run a benchmark sweep into a CSV file")
    b.add_argument("--preset", choices=sorted(PRESETS), default="conflicting")
    b.add_argument("--scales", default="0")
    b.add_argument("--seeds", default="0-9")
    b.add_argument("--algos", default="greedy,psi,ssi,cbba,s_dcop")
    b.add_argument("--budget", type=float, default=60.0)
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
