"""BLAS-style kernels over packed flyte arrays.

Values are widened to the parent type, computed on in parent precision and
narrowed on store. Bulk element traffic always goes through
:func:`~flytes.simd.unpack_stream` / :func:`~flytes.simd.pack_stream`.

Accumulators follow a :class:`StorePolicy`. ``AccumulateWide`` keeps the
running value in the parent type and narrows once at the end;
``RoundEachStore`` narrows after every assignment, which is what strict C
semantics would do with a flyte-typed accumulator.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import _backend
from .convert import RoundingMode, narrow_array, parent_dtype, parent_uint, widen_array
from .formats import FlyteFormat
from .packed import PackedArray
from .simd import DEFAULT_VECTOR_BYTES, build_unpack_plan, pack_stream, unpack_stream

__all__ = [
    "StorePolicy",
    "PackedMatrix",
    "scale",
    "axpy",
    "dot",
    "magnitude",
    "reduce_sum",
    "gemv",
    "gemm",
]

# Elements per streaming chunk; rounded down to whole vector blocks.
CHUNK = 1 << 16

NEAREST = RoundingMode.NearestEvenExact


class StorePolicy(enum.Enum):
    RoundEachStore = "round-each-store"
    AccumulateWide = "accumulate-wide"


@dataclass
class PackedMatrix:
    rows: int
    cols: int
    data: PackedArray

    def __post_init__(self) -> None:
        if self.data.len != self.rows * self.cols:
            raise ValueError(f"{self.rows}x{self.cols} matrix needs {self.rows * self.cols} elements")

    @property
    def fmt(self) -> FlyteFormat:
        return self.data.fmt

    @classmethod
    def zeros(cls, fmt: FlyteFormat | str, rows: int, cols: int) -> "PackedMatrix":
        return cls(rows, cols, PackedArray(fmt, rows * cols))

    @classmethod
    def from_values(cls, fmt: FlyteFormat | str, values, mode: RoundingMode = NEAREST) -> "PackedMatrix":
        arr = np.asarray(values)
        if arr.ndim != 2:
            raise ValueError("matrix values must be 2-D")
        return cls(arr.shape[0], arr.shape[1], PackedArray.from_values(fmt, arr.reshape(-1), mode))

    def to_numpy(self) -> np.ndarray:
        return self.data.to_numpy().reshape(self.rows, self.cols)


def _chunk(fmt: FlyteFormat, vector_bytes: int) -> int:
    g = build_unpack_plan(fmt, vector_bytes).group_elements
    return max(g, CHUNK - CHUNK % g)


def _values(a: PackedArray, vector_bytes: int, offset: int = 0, count: int | None = None) -> np.ndarray:
    return unpack_stream(a, offset=offset, count=count, vector_bytes=vector_bytes).view(parent_dtype(a.fmt))


def _store_scalar(value, fmt: FlyteFormat, mode: RoundingMode):
    """Narrow a parent scalar once and return it widened."""
    cell = np.array([value], dtype=parent_dtype(fmt)).view(parent_uint(fmt))
    return widen_array(narrow_array(cell, fmt, mode), fmt).view(parent_dtype(fmt))[0]


def _same_length(x: PackedArray, y: PackedArray) -> None:
    if x.len != y.len:
        raise ValueError(f"length mismatch: {x.len} vs {y.len}")
    if x.fmt.parent_bits != y.fmt.parent_bits:
        raise ValueError("operands must share a parent type")


def scale(alpha: float, x: PackedArray, mode: RoundingMode = NEAREST, *,
          vector_bytes: int = DEFAULT_VECTOR_BYTES) -> None:
    """In place ``x <- alpha * x``; each chunk is fully read before it is written back."""
    fmt = x.fmt
    a = parent_dtype(fmt)(alpha)
    step = _chunk(fmt, vector_bytes)
    for start in range(0, x.len, step):
        n = min(step, x.len - start)
        vals = _values(x, vector_bytes, start, n)
        pack_stream(x, vals * a, mode, offset=start, vector_bytes=vector_bytes)


def axpy(alpha: float, x: PackedArray, y: PackedArray, mode: RoundingMode = NEAREST, *,
         vector_bytes: int = DEFAULT_VECTOR_BYTES) -> None:
    """In place ``y <- alpha * x + y``."""
    _same_length(x, y)
    a = parent_dtype(y.fmt)(alpha)
    step = _chunk(y.fmt, vector_bytes)
    for start in range(0, y.len, step):
        n = min(step, y.len - start)
        xv = _values(x, vector_bytes, start, n)
        yv = _values(y, vector_bytes, start, n)
        pack_stream(y, a * xv + yv, mode, offset=start, vector_bytes=vector_bytes)


def _accumulate(terms: np.ndarray, fmt: FlyteFormat, policy: StorePolicy, mode: RoundingMode):
    round_each = policy is StorePolicy.RoundEachStore
    total = _backend.get().accumulate(np.ascontiguousarray(terms), fmt.shift, int(mode), round_each)
    return parent_dtype(fmt)(total)


def dot(x: PackedArray, y: PackedArray, policy: StorePolicy = StorePolicy.AccumulateWide,
        mode: RoundingMode = NEAREST, *, vector_bytes: int = DEFAULT_VECTOR_BYTES):
    _same_length(x, y)
    terms = _values(x, vector_bytes) * _values(y, vector_bytes)
    return _store_scalar(_accumulate(terms, x.fmt, policy, mode), x.fmt, mode)


def magnitude(x: PackedArray, policy: StorePolicy = StorePolicy.AccumulateWide,
              mode: RoundingMode = NEAREST, *, vector_bytes: int = DEFAULT_VECTOR_BYTES):
    """Euclidean norm: squares summed left to right, one square root, one final narrow."""
    v = _values(x, vector_bytes)
    total = _accumulate(v * v, x.fmt, policy, mode)
    return _store_scalar(np.sqrt(total), x.fmt, mode)


def reduce_sum(x: PackedArray, policy: StorePolicy = StorePolicy.AccumulateWide,
               mode: RoundingMode = NEAREST, *, vector_bytes: int = DEFAULT_VECTOR_BYTES):
    return _store_scalar(_accumulate(_values(x, vector_bytes), x.fmt, policy, mode), x.fmt, mode)


def _check_unroll(unroll: int) -> None:
    if unroll not in (1, 2):
        raise ValueError("unroll must be 1 or 2")


def gemv(A: PackedMatrix, x: PackedArray, y: PackedArray, mode: RoundingMode = NEAREST,
         unroll: int = 1, *, vector_bytes: int = DEFAULT_VECTOR_BYTES) -> None:
    """``y <- A @ x`` with one wide accumulator per row, narrowed once on store.

    ``unroll=2`` walks each row two vector blocks per inner iteration; the
    summation order, and therefore the result, is unchanged.
    """
    _check_unroll(unroll)
    if x.len != A.cols or y.len != A.rows:
        raise ValueError(f"gemv shape mismatch: A {A.rows}x{A.cols}, x {x.len}, y {y.len}")
    fmt = A.fmt
    vf = vector_bytes // fmt.parent_bytes
    xv = _values(x, vector_bytes)
    yv = np.empty(A.rows, dtype=parent_dtype(fmt))
    be = _backend.get()
    tile = max(1, _chunk(fmt, vector_bytes) // max(A.cols, 1))
    for r0 in range(0, A.rows, tile):
        r = min(tile, A.rows - r0)
        Av = _values(A.data, vector_bytes, r0 * A.cols, r * A.cols).reshape(r, A.cols)
        be.row_dots(Av, xv, yv[r0 : r0 + r], unroll, vf)
    pack_stream(y, yv, mode, vector_bytes=vector_bytes)


def gemm(A: PackedMatrix, B: PackedMatrix, C: PackedMatrix, mode: RoundingMode = NEAREST,
         unroll: int = 1, *, vector_bytes: int = DEFAULT_VECTOR_BYTES) -> None:
    """``C <- A @ B``; each output accumulates over ``k`` left to right in parent precision."""
    _check_unroll(unroll)
    if A.cols != B.rows or C.rows != A.rows or C.cols != B.cols:
        raise ValueError(
            f"gemm shape mismatch: A {A.rows}x{A.cols}, B {B.rows}x{B.cols}, C {C.rows}x{C.cols}"
        )
    fmt = A.fmt
    vf = vector_bytes // fmt.parent_bytes
    Av = _values(A.data, vector_bytes).reshape(A.rows, A.cols)
    Bv = _values(B.data, vector_bytes).reshape(B.rows, B.cols)
    Cv = np.empty((C.rows, C.cols), dtype=parent_dtype(fmt))
    _backend.get().matmul(Av, Bv, Cv, unroll, vf)
    pack_stream(C.data, Cv.reshape(-1), mode, vector_bytes=vector_bytes)
