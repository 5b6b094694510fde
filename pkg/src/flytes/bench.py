"""Benchmark harness: timing, accuracy and footprint reports for the kernels.

Inputs are drawn from numpy's PCG64 generator (``numpy.random.default_rng``)
seeded with ``BenchConfig.seed``: ``uniform(-1, 1)`` doubles, cast to the
parent type, then rounded into the flyte format with ``NearestEvenExact``.

Accuracy is measured against a parent-precision reference that runs the
same operation sequence on the unrounded inputs. The relative error of an
output is ``|out - ref| / mag`` where ``mag`` is the same computation on
absolute values (``sum |a_k * b_k|`` for a dot product), i.e. the scale
used by the standard accumulation error bound ``n * u * sum |a_k b_k|``.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
import os
import statistics
import time
from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Iterable, Protocol, Sequence, TextIO

import numpy as np

from . import _fallback
from .convert import RoundingMode, parent_dtype
from .formats import format_of
from .kernels import PackedMatrix, StorePolicy, axpy, dot, gemm, gemv, magnitude, reduce_sum, scale
from .packed import PackedArray

__all__ = [
    "KERNELS",
    "LEVELS",
    "CSV_HEADER",
    "BenchConfig",
    "BenchReport",
    "BenchError",
    "UnknownKernelError",
    "CounterProvider",
    "register_counter_provider",
    "run_benchmark",
    "emit_csv",
    "parse_csv",
    "sweep",
    "geomean",
    "level_geomeans",
    "load_sweep_config",
    "parse_size",
]

CSV_HEADER = (
    "kernel", "format", "size", "reps", "unroll", "mode",
    "ns_per_elem_median", "ns_per_elem_min", "bytes", "max_rel_err",
)

LEVELS = {"scale": 1, "axpy": 1, "dot": 1, "magnitude": 1, "sum": 1, "gemv": 2, "gemm": 3}
KERNELS = tuple(LEVELS)

SCALE_ALPHA = 1.5


class BenchError(ValueError):
    pass


class UnknownKernelError(BenchError, KeyError):
    pass


class CounterProvider(Protocol):
    """Plug-in for platform counters (cycles, cache misses, ...)."""

    names: Sequence[str]

    def measure(self, fn: Callable[[], None]) -> dict[str, float]: ...


_counter_provider: CounterProvider | None = None


def register_counter_provider(provider: CounterProvider | None) -> None:
    global _counter_provider
    _counter_provider = provider


@dataclass(frozen=True)
class BenchConfig:
    kernel: str
    format: str
    size: int
    reps: int = 10
    mode: RoundingMode = RoundingMode.NearestEvenExact
    unroll: int = 1
    seed: int = 0
    check: bool = False

    def __post_init__(self) -> None:
        if self.kernel not in LEVELS:
            raise UnknownKernelError(f"unknown kernel {self.kernel!r}; choose from {', '.join(KERNELS)}")
        format_of(self.format)
        if self.size < 0:
            raise BenchError("size must be >= 0")
        if self.reps < 1:
            raise BenchError("reps must be >= 1")
        if self.unroll not in (1, 2):
            raise BenchError("unroll must be 1 or 2")
        object.__setattr__(self, "mode", RoundingMode.parse(self.mode))

    @property
    def level(self) -> int:
        return LEVELS[self.kernel]

    @property
    def elements(self) -> int:
        return self.size if self.level == 1 else self.size * self.size


@dataclass
class BenchReport:
    config: BenchConfig
    ns_per_elem_median: float
    ns_per_elem_min: float
    bytes: int
    max_rel_err: float | None
    timings_ns: list[int] = field(default_factory=list)
    output_sha256: str = ""
    counters: dict[str, float] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# workloads
# ---------------------------------------------------------------------------


@dataclass
class _Workload:
    operands: list[PackedArray]
    run: Callable[[], None]
    output: Callable[[], np.ndarray]
    reference: np.ndarray
    magnitude: np.ndarray


def _seq_sum(terms: np.ndarray):
    return _fallback.accumulate(np.ascontiguousarray(terms), 0, 0, False)


def _build(cfg: BenchConfig) -> _Workload:
    fmt = format_of(cfg.format)
    dt = parent_dtype(fmt)
    rng = np.random.default_rng(cfg.seed)
    n = cfg.size

    def draw(*shape: int) -> np.ndarray:
        return rng.uniform(-1.0, 1.0, size=shape).astype(dt)

    def pack(values: np.ndarray) -> PackedArray:
        return PackedArray.from_values(fmt, values.reshape(-1))

    mode, unroll = cfg.mode, cfg.unroll
    k = cfg.kernel
    if k == "scale":
        xv = draw(n)
        x = pack(xv)
        alpha = dt(SCALE_ALPHA)
        return _Workload([x], lambda: scale(alpha, x, mode), x.to_numpy, alpha * xv, np.abs(alpha * xv))
    if k == "axpy":
        xv, yv = draw(n), draw(n)
        x, y = pack(xv), pack(yv)
        alpha = dt(SCALE_ALPHA)
        return _Workload([x, y], lambda: axpy(alpha, x, y, mode), y.to_numpy,
                         alpha * xv + yv, np.abs(alpha * xv) + np.abs(yv))
    if k in ("dot", "magnitude", "sum"):
        xv, yv = draw(n), draw(n)
        x, y = pack(xv), pack(yv)
        out: list = [dt(0)]
        if k == "dot":
            ops = [x, y]
            fn = lambda: out.__setitem__(0, dot(x, y, StorePolicy.AccumulateWide, mode))  # noqa: E731
            ref, mag = _seq_sum(xv * yv), _seq_sum(np.abs(xv * yv))
        elif k == "magnitude":
            ops = [x]
            fn = lambda: out.__setitem__(0, magnitude(x, StorePolicy.AccumulateWide, mode))  # noqa: E731
            ref = np.sqrt(_seq_sum(xv * xv))
            mag = ref
        else:
            ops = [x]
            fn = lambda: out.__setitem__(0, reduce_sum(x, StorePolicy.AccumulateWide, mode))  # noqa: E731
            ref, mag = _seq_sum(xv), _seq_sum(np.abs(xv))
        return _Workload(ops, fn, lambda: np.array([out[0]], dtype=dt),
                         np.array([ref], dtype=dt), np.array([mag], dtype=dt))
    vf = 16 // fmt.parent_bytes
    if k == "gemv":
        Av, xv = draw(n, n), draw(n)
        A = PackedMatrix(n, n, pack(Av))
        x, y = pack(xv), PackedArray(fmt, n)
        ref, mag = np.empty(n, dt), np.empty(n, dt)
        _fallback.row_dots(Av, xv, ref, 1, vf)
        _fallback.row_dots(np.abs(Av), np.abs(xv), mag, 1, vf)
        return _Workload([A.data, x, y], lambda: gemv(A, x, y, mode, unroll), y.to_numpy, ref, mag)
    Av, Bv = draw(n, n), draw(n, n)
    A, B, C = (PackedMatrix(n, n, pack(Av)), PackedMatrix(n, n, pack(Bv)), PackedMatrix.zeros(fmt, n, n))
    ref, mag = np.empty((n, n), dt), np.empty((n, n), dt)
    if cfg.check:
        _fallback.matmul(Av, Bv, ref, 1, vf)
        _fallback.matmul(np.abs(Av), np.abs(Bv), mag, 1, vf)
    return _Workload([A.data, B.data, C.data], lambda: gemm(A, B, C, mode, unroll),
                     lambda: C.to_numpy().reshape(-1), ref.reshape(-1), mag.reshape(-1))


def max_relative_error(out: np.ndarray, ref: np.ndarray, mag: np.ndarray) -> float:
    out = np.asarray(out, dtype=np.float64).reshape(-1)
    ref = np.asarray(ref, dtype=np.float64).reshape(-1)
    mag = np.asarray(mag, dtype=np.float64).reshape(-1)
    if out.size == 0:
        return 0.0
    diff = np.abs(out - ref)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(mag > 0, diff / np.where(mag > 0, mag, 1.0), np.where(diff == 0, 0.0, np.inf))
    return float(rel.max())


def _check_memory(cfg: BenchConfig) -> None:
    fmt = format_of(cfg.format)
    operands = {1: 2, 2: 1, 3: 3}[cfg.level]
    # packed operands plus parent-precision inputs, reference and scratch
    estimate = cfg.elements * operands * (fmt.nbytes + 4 * fmt.parent_bytes)
    try:
        phys = os.sysconf("SC_PAGE_SIZE") * os.sysconf("SC_PHYS_PAGES")
    except (ValueError, OSError, AttributeError):
        return
    if estimate > phys // 2:
        raise BenchError(f"{cfg.kernel} at size {cfg.size} needs ~{estimate} bytes; too large for this host")


def run_benchmark(cfg: BenchConfig) -> BenchReport:
    """Build inputs, run one untimed warm-up, then ``reps`` timed runs.

    In-place kernels get their operands restored (untimed) before each rep
    so every timed run sees identical data.
    """
    _check_memory(cfg)
    w = _build(cfg)
    pristine = [a.payload.copy() for a in w.operands]

    w.run()
    result = w.output()
    digest = hashlib.sha256(np.ascontiguousarray(result).tobytes()).hexdigest()
    err = max_relative_error(result, w.reference, w.magnitude) if cfg.check else None

    timings = []
    for _ in range(cfg.reps):
        for a, saved in zip(w.operands, pristine):
            np.copyto(a.payload, saved)
        t0 = time.perf_counter_ns()
        w.run()
        timings.append(time.perf_counter_ns() - t0)

    counters: dict[str, float] = {}
    if _counter_provider is not None:
        counters = dict(_counter_provider.measure(w.run))

    elems = cfg.elements
    per = [t / elems for t in timings] if elems else [math.nan] * len(timings)
    return BenchReport(
        config=cfg,
        ns_per_elem_median=float(statistics.median(per)),
        ns_per_elem_min=float(min(per)),
        bytes=sum(a.nbytes for a in w.operands),
        max_rel_err=err,
        timings_ns=timings,
        output_sha256=digest,
        counters=counters,
    )


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def _num(x: float | int | None) -> str:
    if x is None:
        return ""
    return repr(float(x)) if isinstance(x, float) else str(x)


def emit_csv(reports: Iterable[BenchReport], sink: TextIO) -> None:
    """Write the fixed header plus one row per report.

    Counter columns from a registered provider are appended after the
    fixed columns, and only when at least one report carries them.
    """
    reports = list(reports)
    extra: list[str] = []
    for r in reports:
        extra += [k for k in r.counters if k not in extra]
    w = csv.writer(sink, lineterminator="\n")
    w.writerow(list(CSV_HEADER) + extra)
    for r in reports:
        c = r.config
        w.writerow([
            c.kernel, format_of(c.format).name, c.size, c.reps, c.unroll, c.mode.cli_name,
            _num(r.ns_per_elem_median), _num(r.ns_per_elem_min), r.bytes, _num(r.max_rel_err),
        ] + [_num(r.counters.get(k)) for k in extra])


_INT_COLS = {"size", "reps", "unroll", "bytes"}
_FLOAT_COLS = {"ns_per_elem_median", "ns_per_elem_min", "max_rel_err"}


def parse_csv(source: TextIO | str) -> list[dict]:
    """Read back :func:`emit_csv` output with typed fields (empty cells become None)."""
    if isinstance(source, str):
        source = io.StringIO(source)
    rows = []
    for row in csv.DictReader(source):
        typed: dict = {}
        for k, v in row.items():
            if v == "":
                typed[k] = None
            elif k in _INT_COLS:
                typed[k] = int(v)
            elif k in _FLOAT_COLS or k not in ("kernel", "format", "mode"):
                typed[k] = float(v)
            else:
                typed[k] = v
        rows.append(typed)
    return rows


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------


def sweep(
    kernels: Sequence[str],
    formats: Sequence[str],
    sizes: Sequence[int],
    *,
    reps: int = 10,
    mode: RoundingMode | str = RoundingMode.NearestEvenExact,
    unroll: int = 1,
    seed: int = 0,
    check: bool = False,
    progress: Callable[[BenchConfig], None] | None = None,
) -> list[BenchReport]:
    reports = []
    for k, f, n in product(kernels, formats, sizes):
        cfg = BenchConfig(k, f, n, reps=reps, mode=RoundingMode.parse(mode), unroll=unroll, seed=seed, check=check)
        if progress:
            progress(cfg)
        reports.append(run_benchmark(cfg))
    return reports


def geomean(values: Iterable[float]) -> float:
    vals = list(values)
    if not vals:
        return math.nan
    if any(v <= 0 or math.isnan(v) for v in vals):
        return math.nan
    return math.exp(sum(math.log(v) for v in vals) / len(vals))


def level_geomeans(reports: Iterable[BenchReport]) -> list[tuple[int, str, int, float]]:
    """Geometric mean of median ns/element per (BLAS level, format, size)."""
    groups: dict[tuple[int, str, int], list[float]] = {}
    for r in reports:
        c = r.config
        groups.setdefault((c.level, format_of(c.format).name, c.size), []).append(r.ns_per_elem_median)
    return [(lvl, f, n, geomean(v)) for (lvl, f, n), v in groups.items()]


def parse_size(text: str) -> int:
    """Accept ``1048576``, ``2^20`` or ``1<<20``."""
    text = text.strip()
    if "^" in text:
        base, exp = text.split("^", 1)
        return int(base) ** int(exp)
    if "<<" in text:
        a, b = text.split("<<", 1)
        return int(a) << int(b)
    return int(text)


_BOOL = {"1": True, "true": True, "yes": True, "on": True, "0": False, "false": False, "no": False, "off": False}


def load_sweep_config(source: TextIO | str) -> dict:
    """Parse a ``key=value`` sweep file.

    Recognised keys: ``kernels``, ``formats``, ``sizes`` (comma lists),
    ``reps``, ``mode``, ``unroll``, ``seed``, ``check``, ``geomean``,
    ``backend``. Blank lines and ``#`` comments are ignored.
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    cfg: dict = {"check": False, "geomean": False}
    for lineno, raw in enumerate(source, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise BenchError(f"line {lineno}: expected key=value, got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        items = [v.strip() for v in value.split(",") if v.strip()]
        if key in ("kernels", "formats"):
            cfg[key] = items
        elif key == "sizes":
            cfg[key] = [parse_size(v) for v in items]
        elif key in ("reps", "unroll", "seed"):
            cfg[key] = int(value)
        elif key in ("check", "geomean"):
            if value.lower() not in _BOOL:
                raise BenchError(f"line {lineno}: {key} must be a boolean")
            cfg[key] = _BOOL[value.lower()]
        elif key == "mode":
            cfg[key] = RoundingMode.parse(value)
        elif key == "backend":
            cfg[key] = value
        else:
            raise BenchError(f"line {lineno}: unknown key {key!r}")
    for key in ("kernels", "formats", "sizes"):
        if key not in cfg:
            raise BenchError(f"sweep config is missing {key!r}")
    return cfg
