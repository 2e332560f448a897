"""Command line interface.

    codeflow analyze PROGRAM
    codeflow run PROGRAM [--topology PATH] [--mode jit|aot] [--migrate] ...
    codeflow fmt PROGRAM
    codeflow topology-validate PATH [--paper-ordering] [--strict]
    codeflow bench-chase [--min SIZE] [--max SIZE] [--stride N] [--csv PATH]
    codeflow bench-bandwidth [--size SIZE] [--repeats N]
    codeflow bench-wasm [--size SIZE] [--placement REGION]

Machine output goes to stdout, logs to stderr. Exit codes: 0 success, 1 a
guest trap, deadlock or failed lint, 2 bad input or configuration.
"""

import argparse
import json
import logging
import re
import sys
from contextlib import contextmanager
from typing import Optional

from codeflow import __version__
from codeflow.config import settings
from codeflow.errors import CodeflowError, ConfigError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_ERROR = 2

_SIZE = re.compile(r"^(\d+)\s*(K|M|G|KiB|MiB|GiB)?$")
_UNITS = {None: 1, "K": 1 << 10, "KiB": 1 << 10, "M": 1 << 20, "MiB": 1 << 20, "G": 1 << 30, "GiB": 1 << 30}


def parse_size(text: str) -> int:
    """Byte count with an optional K/M/G or KiB/MiB/GiB suffix (powers of two)."""
    match = _SIZE.match(text.strip())
    if not match:
        raise argparse.ArgumentTypeError(f"invalid size {text!r} (examples: 4096, 64KiB, 256M)")
    return int(match.group(1)) * _UNITS[match.group(2)]


def parse_file_arg(text: str) -> tuple[int, str]:
    fd, sep, path = text.partition("=")
    if not sep or not fd.isdigit() or not path:
        raise argparse.ArgumentTypeError(f"expected FD=PATH, got {text!r}")
    return int(fd), path


@contextmanager
def _output(path: Optional[str]):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="") as f:
            yield f


def _print_json(data):
    json.dump(data, sys.stdout, indent=2)
    sys.stdout.write("\n")


# =============================================================================
# Commands
# =============================================================================

def cmd_analyze(args) -> int:
    from codeflow.analysis import analyze_module
    from codeflow.cft import validate_module
    from codeflow.errors import ModuleRejected
    from codeflow.runtime import load_program

    m = load_program(args.program)
    report = validate_module(m)
    if not report.ok:
        raise ModuleRejected(report)
    _print_json([a.to_dict() for a in analyze_module(m, args.r_threshold)])
    return EXIT_OK


def cmd_fmt(args) -> int:
    from codeflow.cft import print_module
    from codeflow.runtime import load_program

    sys.stdout.write(print_module(load_program(args.program)))
    return EXIT_OK


def _run_config(args):
    from codeflow.runtime import load_run_config, make_run_config

    overrides = dict(
        mode=args.mode, quantum=args.quantum, seed=args.seed,
        initial_placement=args.placement, max_instructions=args.max_instructions,
    )
    base = {}
    if args.config:
        base = load_run_config(args.config).model_dump(exclude_unset=True, mode="json")
    knobs = {
        "epoch_instructions": args.epoch,
        "hot_threshold": args.hot_threshold,
        "migration_fixed_overhead_ns": args.migration_overhead,
    }
    knobs = {k: v for k, v in knobs.items() if v is not None}
    if args.migrate or knobs or base.get("migration"):
        policy = dict(base.get("migration") or {})
        policy.update(knobs)
        overrides["migration"] = policy
    return make_run_config(base, **overrides)


def cmd_run(args) -> int:
    from codeflow.engine import HostEnv
    from codeflow.runtime import Runner, load_program
    from codeflow.topology import load_topology

    cfg = _run_config(args)
    files = {}
    for fd, path in args.file or []:
        try:
            with open(path, "rb") as f:
                files[fd] = f.read()
        except OSError as e:
            raise ConfigError(f"cannot read virtual file for fd {fd}: {e}") from None
    m = load_program(args.program)
    t = load_topology(args.topology or settings.topology)
    report = Runner(m, t, cfg, HostEnv(files)).run()
    with _output(args.report) as out:
        out.write(report.to_json())
    if report.exit_code:
        logger.error(f"Run of {args.program} ended with status {report.exit_status}")
    return report.exit_code


def cmd_topology_validate(args) -> int:
    from codeflow.topology import load_topology, validate_topology

    report = validate_topology(load_topology(args.topology), paper_ordering_lint=args.paper_ordering)
    _print_json([f.to_dict() for f in report.findings])
    if report.errors or (args.strict and report.findings):
        return EXIT_FAILED
    return EXIT_OK


def cmd_bench_chase(args) -> int:
    from codeflow.hostbench import sweep, write_csv, write_json

    rows = sweep(args.min, args.max, args.factor, args.stride, args.seed, args.loads, args.repeats)
    with _output(args.csv) as out:
        write_csv(rows, out)
    if args.json:
        with _output(args.json) as out:
            write_json(rows, out)
    return EXIT_OK


def cmd_bench_bandwidth(args) -> int:
    from codeflow.hostbench import measure_bandwidth

    _print_json(measure_bandwidth(args.size, args.repeats).to_dict())
    return EXIT_OK


def cmd_bench_wasm(args) -> int:
    from codeflow.hostbench.wasm import run_wasm_chase
    from codeflow.topology import load_topology

    t = load_topology(args.topology or settings.topology)
    result = run_wasm_chase(t, args.size, args.stride, args.loads, args.seed, args.placement)
    _print_json(result.to_dict())
    return EXIT_OK


# =============================================================================
# Parser
# =============================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="codeflow", description="Heterogeneous thread runtime simulator")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=None, help=f"logging level (default {settings.log_level})")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="profile thread entries and print affinity decisions")
    p.add_argument("program", help="program name or .cft path")
    p.add_argument("--r-threshold", type=float, default=None, help="arith/mem ratio for accelerators")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("fmt", help="print a program in canonical form")
    p.add_argument("program")
    p.set_defaults(func=cmd_fmt)

    p = sub.add_parser("run", help="run a program on a simulated topology")
    p.add_argument("program")
    p.add_argument("--topology", help=f"topology JSON (default {settings.topology})")
    p.add_argument("--config", help="YAML run configuration; flags override it")
    p.add_argument("--mode", choices=["jit", "aot"], default=None)
    p.add_argument("--quantum", type=int, default=None, help="instructions per scheduling turn")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--migrate", action="store_true", help="enable epoch page migration")
    p.add_argument("--epoch", type=int, default=None, help="instructions per migration epoch")
    p.add_argument("--hot-threshold", type=int, default=None, help="accesses that make a page hot")
    p.add_argument("--migration-overhead", type=float, default=None, help="fixed ns per page move")
    p.add_argument("--placement", default=None, help="region for the initial memory (default: first region)")
    p.add_argument("--max-instructions", type=int, default=None, help="stop after this many instructions")
    p.add_argument("--file", type=parse_file_arg, action="append", metavar="FD=PATH",
                   help="preload a virtual file (repeatable)")
    p.add_argument("--report", default="-", help="report path, or - for stdout")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("topology-validate", help="check a topology file")
    p.add_argument("topology")
    p.add_argument("--paper-ordering", action="store_true", help="check the expected CXL latency/bandwidth order")
    p.add_argument("--strict", action="store_true", help="fail on warnings too")
    p.set_defaults(func=cmd_topology_validate)

    p = sub.add_parser("bench-chase", help="pointer-chase latency sweep on this machine")
    p.add_argument("--min", type=parse_size, default=parse_size("16KiB"))
    p.add_argument("--max", type=parse_size, default=parse_size("64MiB"))
    p.add_argument("--factor", type=float, default=2.0)
    p.add_argument("--stride", type=parse_size, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--loads", type=int, default=None, help="timed loads per pass (default max(1e6, slots))")
    p.add_argument("--repeats", type=int, default=None)
    p.add_argument("--csv", default="-", help="CSV path, or - for stdout")
    p.add_argument("--json", default=None, help="also write rows as JSON")
    p.set_defaults(func=cmd_bench_chase)

    p = sub.add_parser("bench-bandwidth", help="streaming-read bandwidth on this machine")
    p.add_argument("--size", type=parse_size, default=parse_size("64MiB"))
    p.add_argument("--repeats", type=int, default=None)
    p.set_defaults(func=cmd_bench_bandwidth)

    p = sub.add_parser("bench-wasm", help="pointer chase inside the simulated runtime")
    p.add_argument("--topology", help=f"topology JSON (default {settings.topology})")
    p.add_argument("--size", type=parse_size, default=parse_size("64KiB"))
    p.add_argument("--stride", type=parse_size, default=64)
    p.add_argument("--loads", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--placement", default=None, help="region holding the chain")
    p.set_defaults(func=cmd_bench_wasm)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = args.log_level or settings.log_level
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.WARNING),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except CodeflowError as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_ERROR
