"""
Command line: `run` profiles an assembly program, `simulate` runs the
estimator study.

Exit codes: 0 ok, 1 input/program error, 2 usage error, 3 runaway guard.
"""

from __future__ import annotations

import argparse
import sys
from typing import List, Optional

from .core.config import ConfigError, ProfilerConfig
from .core.service import profile_file, simulate_study
from .export.exporter_csv import render_study_csv
from .export.exporter_txt import render_report
from .profiler.heap import OutOfMemoryError
from .simulation.simulator import SimulationError
from .vm.assembler import AssemblyError
from .vm.machine import ExitStatus, VmError

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_USAGE = 2
EXIT_RUNAWAY = 3


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if value <= 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text}")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if value <= 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="miniprof",
        description="Profile miniature-VM programs and reproduce the estimator study.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="profile an assembly program")
    r.add_argument("program", help="path to a .asm program")
    r.add_argument("--q", type=_positive_float, default=None, help="CPU sampling quantum (s)")
    r.add_argument("--cpu-only", action="store_true", help="disable allocation/copy sampling")
    r.add_argument("--alloc-threshold", type=_positive_int, default=None, help="bytes per malloc/free record")
    r.add_argument("--switch-interval", type=_positive_float, default=None, help="green-thread quantum (s)")
    r.add_argument("--profile-interval", type=_positive_float, default=None, help="checkpoint every S virtual seconds")
    r.add_argument("--out", default=None, help="write the report here (stdout otherwise)")
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--events", default=None, help="persist drained records to this file")
    r.add_argument("--max-time", type=_positive_float, default=None, help="runaway guard (virtual s)")
    r.add_argument("--op-cost", type=_positive_float, default=None, help="cost of one opcode (s)")
    r.add_argument("--no-patch-join", action="store_true", help="leave JOIN blocking")

    s = sub.add_parser("simulate", help="run the estimator convergence study")
    s.add_argument("--runs", type=_positive_int, default=10)
    s.add_argument("--lines", type=_positive_int, default=100)
    s.add_argument("--alpha", type=float, default=1.16)
    s.add_argument("--q", type=_positive_float, default=0.01)
    s.add_argument("--max-time", type=float, default=64.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--csv", default=None, help="write the study table here (stdout otherwise)")
    return parser


def _cmd_run(args: argparse.Namespace) -> int:
    config = ProfilerConfig.from_env().with_overrides(
        quantum=args.q,
        alloc_threshold=args.alloc_threshold,
        switch_interval=args.switch_interval,
        profile_interval=args.profile_interval,
        seed=args.seed,
        max_time=args.max_time,
        op_cost=args.op_cost,
        cpu_only=True if args.cpu_only else None,
        patch_join=False if args.no_patch_join else None,
    )
    outcome = profile_file(args.program, config, out=args.out, events_path=args.events)
    if not args.out:
        sys.stdout.write(render_report(outcome.report))
    if outcome.status is ExitStatus.ABORTED:
        print(f"[CLI] runaway guard hit after {config.max_time}s virtual", file=sys.stderr, flush=True)
        return EXIT_RUNAWAY
    return EXIT_OK


def _cmd_simulate(args: argparse.Namespace) -> int:
    table = simulate_study(
        runs=args.runs,
        lines=args.lines,
        alpha=args.alpha,
        q=args.q,
        max_time=args.max_time,
        seed=args.seed,
        csv_path=args.csv,
    )
    if not args.csv:
        sys.stdout.write(render_study_csv(table))
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse already printed usage; --help exits 0
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    try:
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_simulate(args)
    except ConfigError as e:
        parser.print_usage(sys.stderr)
        print(f"[CLI] {e}", file=sys.stderr, flush=True)
        return EXIT_USAGE
    except (OSError, AssemblyError, VmError, OutOfMemoryError, SimulationError, NotImplementedError) as e:
        print(f"[CLI] {type(e).__name__}: {e}", file=sys.stderr, flush=True)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
