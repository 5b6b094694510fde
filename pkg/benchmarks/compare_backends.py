"""Time the compiled and pure-Python backends side by side.

    python benchmarks/compare_backends.py [--size 2^20] [--reps 10] [--formats flyte24,flyte40]

Prints one row per (operation, format) with the median ns/element under each
backend and the ratio. Outputs from both backends are compared bit for bit.
"""

from __future__ import annotations

import argparse
import statistics
import sys
import time

import numpy as np

from flytes import available_backends, use_backend
from flytes.bench import parse_size
from flytes.kernels import PackedMatrix, gemv, reduce_sum, scale
from flytes.packed import PackedArray
from flytes.simd import pack_stream, unpack_stream


def _median_ns(fn, reps, reset=None):
    times = []
    for _ in range(reps):
        if reset:
            reset()
        t0 = time.perf_counter_ns()
        fn()
        times.append(time.perf_counter_ns() - t0)
    return statistics.median(times)


def _cases(fmt, n, rng):
    x = PackedArray.from_values(fmt, rng.uniform(-1, 1, n))
    pristine = x.payload.copy()
    wide = unpack_stream(x)
    order = max(1, int(n**0.5) // 4)
    A = PackedMatrix.from_values(fmt, rng.uniform(-1, 1, (order, order)))
    v = PackedArray.from_values(fmt, rng.uniform(-1, 1, order))
    y = PackedArray(fmt, order)

    def reset():
        np.copyto(x.payload, pristine)

    # (name, elements, run, reset, result)
    return [
        ("unpack", n, lambda: unpack_stream(x, wide), None, lambda: wide.tobytes()),
        ("pack", n, lambda: pack_stream(x, wide), reset, lambda: x.payload.tobytes()),
        ("scale", n, lambda: scale(1.5, x), reset, lambda: x.payload.tobytes()),
        ("sum", n, lambda: reduce_sum(x), None, lambda: reduce_sum(x).tobytes()),
        ("gemv", order * order, lambda: gemv(A, v, y), None, lambda: y.payload.tobytes()),
    ]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=parse_size, default=1 << 20)
    ap.add_argument("--reps", type=int, default=10)
    ap.add_argument("--formats", default="flyte16,flyte24,flyte40,flyte48,flyte56")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    backends = available_backends()
    if "compiled" not in backends:
        print("compiled backend not built; only the python backend will be timed", file=sys.stderr)

    print("op,format,elements," + ",".join(f"{b}_ns_per_elem" for b in backends) + ",speedup,identical")
    for fmt in args.formats.split(","):
        rows: dict[str, dict] = {}
        for be in backends:
            with use_backend(be):
                for name, elems, run, reset, result in _cases(fmt, args.size, np.random.default_rng(args.seed)):
                    if reset:
                        reset()
                    run()
                    out = result()
                    ns = _median_ns(run, args.reps, reset) / elems
                    rows.setdefault(name, {"elems": elems, "ns": {}, "out": set()})
                    rows[name]["ns"][be] = ns
                    rows[name]["out"].add(out)
        for name, r in rows.items():
            ns = [r["ns"][b] for b in backends]
            speedup = r["ns"]["python"] / r["ns"]["compiled"] if len(backends) == 2 else float("nan")
            cells = ",".join(f"{t:.2f}" for t in ns)
            print(f"{name},{fmt},{r['elems']},{cells},{speedup:.2f},{len(r['out']) == 1}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
