"""``flytebench`` command line.

    flytebench run --kernel scale --format flyte24 --size 2^20 --reps 10 --check
    flytebench sweep --config sweep.cfg --csv out.csv
"""

from __future__ import annotations

import argparse
import sys
from contextlib import nullcontext

from . import _backend
from .bench import (
    KERNELS,
    BenchConfig,
    BenchError,
    emit_csv,
    level_geomeans,
    load_sweep_config,
    parse_size,
    run_benchmark,
    sweep,
)
from .convert import RoundingMode
from .formats import FORMATS, UnknownFormatError

MODES = [m.cli_name for m in RoundingMode]


def _output(path: str | None):
    return open(path, "w", newline="") if path else nullcontext(sys.stdout)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--csv", metavar="PATH", help="write CSV here instead of stdout")
    p.add_argument("--backend", choices=["auto", "compiled", "python"], default=None,
                   help="kernel backend (default: compiled if built)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flytebench", description="Benchmark flyte storage formats.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="benchmark one kernel/format/size")
    run.add_argument("--kernel", required=True, choices=KERNELS)
    run.add_argument("--format", required=True, help=f"one of {', '.join(FORMATS)} (aliases flyte32, flyte64)")
    run.add_argument("--size", required=True, type=parse_size, help="elements (BLAS-1) or matrix order, e.g. 2^20")
    run.add_argument("--reps", type=int, default=10)
    run.add_argument("--mode", choices=MODES, default="nearest-even")
    run.add_argument("--unroll", type=int, choices=[1, 2], default=1)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--check", action="store_true", help="measure error against a parent-precision reference")
    _add_common(run)

    sw = sub.add_parser("sweep", help="run the cartesian product described by a config file")
    sw.add_argument("--config", required=True, metavar="FILE")
    sw.add_argument("--geomean", action="store_true", help="also print per-level geometric means to stderr")
    _add_common(sw)
    return parser


def _run(args: argparse.Namespace) -> int:
    cfg = BenchConfig(args.kernel, args.format, args.size, reps=args.reps, mode=RoundingMode.parse(args.mode),
                      unroll=args.unroll, seed=args.seed, check=args.check)
    report = run_benchmark(cfg)
    with _output(args.csv) as sink:
        emit_csv([report], sink)
    return 0


def _sweep(args: argparse.Namespace) -> int:
    with open(args.config) as fh:
        cfg = load_sweep_config(fh)
    backend = args.backend or cfg.get("backend")
    ctx = _backend.use_backend(backend) if backend else nullcontext()
    with ctx:
        reports = sweep(
            cfg["kernels"], cfg["formats"], cfg["sizes"],
            reps=cfg.get("reps", 10), mode=cfg.get("mode", RoundingMode.NearestEvenExact),
            unroll=cfg.get("unroll", 1), seed=cfg.get("seed", 0), check=cfg["check"],
            progress=lambda c: print(f"# {c.kernel} {c.format} {c.size}", file=sys.stderr),
        )
    with _output(args.csv) as sink:
        emit_csv(reports, sink)
    if args.geomean or cfg["geomean"]:
        print("level,format,size,ns_per_elem_geomean", file=sys.stderr)
        for level, fmt, size, g in level_geomeans(reports):
            print(f"{level},{fmt},{size},{g!r}", file=sys.stderr)
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            ctx = _backend.use_backend(args.backend) if args.backend else nullcontext()
            with ctx:
                return _run(args)
        return _sweep(args)
    except (BenchError, UnknownFormatError, ValueError, OSError) as exc:
        print(f"flytebench: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
