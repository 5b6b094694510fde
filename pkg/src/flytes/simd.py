"""Vector-block pack/unpack engine.

A :class:`PackPlan` describes how ``n_in`` vectors of parent-width lanes map
onto ``n_out`` fully packed vectors of flyte bytes. Packing runs in two
phases: a per-register byte permute that compacts the significant bytes of
each lane and rotates them so the register's first element lands on the
first free byte of the output stream, then a series of byte blends that
merge the rotated registers into whole output vectors. Unpacking runs the
mirror image (blend, then permute with zero fill).

Plans only use byte-granular shuffle and select operations, so the same
plan drives the compiled backend, the numpy backend, and the symbolic
checker in :func:`execute_symbolic`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Any, Sequence

import numpy as np

from . import _backend
from .convert import RoundingMode, parent_uint
from .formats import FlyteFormat, format_of
from .packed import PackedArray, packed_get, packed_set

__all__ = [
    "DEFAULT_VECTOR_BYTES",
    "BlendStep",
    "PackPlan",
    "build_pack_plan",
    "build_unpack_plan",
    "execute_symbolic",
    "pack_block",
    "unpack_block",
    "pack_stream",
    "unpack_stream",
    "pack_scalar",
    "unpack_scalar",
]

DEFAULT_VECTOR_BYTES = 16
ZERO = -1  # permute entry meaning "write a zero byte"


@dataclass(frozen=True)
class BlendStep:
    """Copy the bytes of ``src`` selected by ``select`` into ``dst``."""

    dst: int
    src: int
    select: tuple[bool, ...]


@dataclass(frozen=True)
class PackPlan:
    fmt: FlyteFormat
    vector_bytes: int
    lanes_per_vector: int
    vectors_in: int
    vectors_out: int
    permute_masks: tuple[tuple[int, ...], ...]
    blend_masks: tuple[BlendStep, ...]
    direction: str = "pack"

    @property
    def group_elements(self) -> int:
        """Elements handled by one block: ``n_in * L``."""
        return self.vectors_in * self.lanes_per_vector

    @property
    def group_bytes(self) -> int:
        return self.vectors_out * self.vector_bytes

    @cached_property
    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(permute int16[n_in, V], blend dst int32, blend src int32, blend select uint8[steps, V])."""
        perm = np.array(self.permute_masks, dtype=np.int16).reshape(self.vectors_in, self.vector_bytes)
        dst = np.array([s.dst for s in self.blend_masks], dtype=np.int32)
        src = np.array([s.src for s in self.blend_masks], dtype=np.int32)
        sel = np.array([s.select for s in self.blend_masks], dtype=np.uint8).reshape(
            len(self.blend_masks), self.vector_bytes
        )
        return perm, dst, src, sel


def _geometry(fmt: FlyteFormat, vector_bytes: int) -> tuple[int, int, int]:
    V = vector_bytes
    P = fmt.parent_bytes
    if V < P or V & (V - 1):
        raise ValueError(f"unsupported vector width {V} bytes for {fmt.name}")
    L = V // P
    LB = L * fmt.nbytes
    n_in = V // math.gcd(LB, V)
    n_out = n_in * LB // V
    return L, n_in, n_out


def _segments(k: int, LB: int, V: int) -> tuple[int, int, tuple[bool, ...], tuple[bool, ...] | None]:
    """Placement of register ``k``'s compacted bytes in the output stream.

    Returns the rotation ``s``, the first output vector ``q``, the byte
    selector for ``q`` and, if the register straddles a vector boundary,
    the selector for ``q + 1``.
    """
    start = k * LB
    s, q = start % V, start // V
    head = tuple(s <= p < s + LB for p in range(V))
    tail = tuple(p < s + LB - V for p in range(V)) if s + LB > V else None
    return s, q, head, tail


@lru_cache(maxsize=None)
def build_pack_plan(fmt: FlyteFormat | str, vector_bytes: int = DEFAULT_VECTOR_BYTES) -> PackPlan:
    fmt = format_of(fmt)
    V, P, B = vector_bytes, fmt.parent_bytes, fmt.nbytes
    L, n_in, n_out = _geometry(fmt, V)
    low = fmt.shift // 8  # discarded bytes at the bottom of each lane
    LB = L * B
    perms, steps = [], []
    for k in range(n_in):
        s, q, head, tail = _segments(k, LB, V)
        mask = [ZERO] * V
        for j in range(LB):
            lane, b = divmod(j, B)
            mask[(s + j) % V] = lane * P + low + b
        perms.append(tuple(mask))
        steps.append(BlendStep(q, k, head))
        if tail is not None:
            steps.append(BlendStep(q + 1, k, tail))
    return PackPlan(fmt, V, L, n_in, n_out, tuple(perms), tuple(steps), "pack")


@lru_cache(maxsize=None)
def build_unpack_plan(fmt: FlyteFormat | str, vector_bytes: int = DEFAULT_VECTOR_BYTES) -> PackPlan:
    fmt = format_of(fmt)
    V, P, B = vector_bytes, fmt.parent_bytes, fmt.nbytes
    L, n_in, n_out = _geometry(fmt, V)
    low = fmt.shift // 8
    LB = L * B
    perms, steps = [], []
    for k in range(n_in):
        s, q, head, tail = _segments(k, LB, V)
        steps.append(BlendStep(k, q, head))
        if tail is not None:
            steps.append(BlendStep(k, q + 1, tail))
        mask = [ZERO] * V
        for lane in range(L):
            for b in range(B):
                mask[lane * P + low + b] = (s + lane * B + b) % V
        perms.append(tuple(mask))
    return PackPlan(fmt, V, L, n_in, n_out, tuple(perms), tuple(steps), "unpack")


def _permute(vec: Sequence[Any], mask: Sequence[int], zero: Any) -> list:
    return [zero if m == ZERO else vec[m] for m in mask]


def _blend(dst: list, src: Sequence[Any], select: Sequence[bool]) -> None:
    for p, on in enumerate(select):
        if on:
            dst[p] = src[p]


def execute_symbolic(plan: PackPlan, vectors: Sequence[Sequence[Any]], zero: Any = None) -> list[list]:
    """Run ``plan`` on vectors of arbitrary byte labels.

    For a pack plan ``vectors`` are the ``n_in`` lane registers; for an
    unpack plan they are the ``n_out`` packed registers. Unselected or
    zero-filled bytes come out as ``zero``.
    """
    V = plan.vector_bytes
    if plan.direction == "pack":
        if len(vectors) != plan.vectors_in:
            raise ValueError("expected %d input vectors" % plan.vectors_in)
        permuted = [_permute(v, m, zero) for v, m in zip(vectors, plan.permute_masks)]
        out = [[zero] * V for _ in range(plan.vectors_out)]
        for step in plan.blend_masks:
            _blend(out[step.dst], permuted[step.src], step.select)
        return out
    if len(vectors) != plan.vectors_out:
        raise ValueError("expected %d packed vectors" % plan.vectors_out)
    combined = [[zero] * V for _ in range(plan.vectors_in)]
    for step in plan.blend_masks:
        _blend(combined[step.dst], vectors[step.src], step.select)
    return [_permute(c, m, zero) for c, m in zip(combined, plan.permute_masks)]


# ---------------------------------------------------------------------------
# block and stream execution
# ---------------------------------------------------------------------------


def _as_bits(arr: np.ndarray, fmt: FlyteFormat, writable: bool = False) -> np.ndarray:
    arr = np.asarray(arr)
    u = parent_uint(fmt)
    if arr.dtype.kind == "f":
        if arr.dtype.itemsize != fmt.parent_bytes:
            raise TypeError(f"{fmt.name} expects {fmt.parent_bits}-bit parent values")
        return arr.view(u)
    if writable and arr.dtype != u:
        raise TypeError(f"destination must be {np.dtype(u).name} or a matching float array")
    return arr.astype(u, copy=False)


def pack_block(plan: PackPlan, lanes: np.ndarray, mode: RoundingMode = RoundingMode.NearestEvenExact) -> np.ndarray:
    """Round and pack one block; ``lanes`` is ``(n_in, L)`` parent patterns. Returns ``(n_out, V)`` bytes."""
    if plan.direction != "pack":
        raise ValueError("pack_block needs a pack plan")
    lanes = np.ascontiguousarray(_as_bits(lanes, plan.fmt))
    if lanes.shape != (plan.vectors_in, plan.lanes_per_vector):
        raise ValueError(f"lanes must have shape {(plan.vectors_in, plan.lanes_per_vector)}")
    out = np.zeros(plan.group_bytes, dtype=np.uint8)
    _backend.get().pack_groups(lanes.reshape(-1), out, *plan.arrays, plan.vectors_in, plan.vectors_out,
                               plan.vector_bytes, plan.fmt.shift, int(mode))
    return out.reshape(plan.vectors_out, plan.vector_bytes)


def unpack_block(plan: PackPlan, packed: np.ndarray) -> np.ndarray:
    """Inverse of :func:`pack_block`: ``(n_out, V)`` bytes to ``(n_in, L)`` widened lanes."""
    if plan.direction != "unpack":
        raise ValueError("unpack_block needs an unpack plan")
    packed = np.ascontiguousarray(packed, dtype=np.uint8)
    if packed.shape != (plan.vectors_out, plan.vector_bytes):
        raise ValueError(f"packed bytes must have shape {(plan.vectors_out, plan.vector_bytes)}")
    lanes = np.empty(plan.group_elements, dtype=parent_uint(plan.fmt))
    _backend.get().unpack_groups(packed.reshape(-1), lanes, *plan.arrays, plan.vectors_in, plan.vectors_out,
                                 plan.vector_bytes)
    return lanes.reshape(plan.vectors_in, plan.lanes_per_vector)


def pack_scalar(dst: PackedArray, src: np.ndarray, mode: RoundingMode = RoundingMode.NearestEvenExact,
                offset: int = 0) -> None:
    """Element-at-a-time reference path built on :func:`packed_set`."""
    src = _as_bits(src, dst.fmt)
    for i, x in enumerate(src.tolist()):
        packed_set(dst, offset + i, x, mode)


def unpack_scalar(src: PackedArray, dst: np.ndarray, offset: int = 0) -> np.ndarray:
    out = _as_bits(dst, src.fmt, writable=True)
    for i in range(out.shape[0]):
        out[i] = packed_get(src, offset + i)
    return dst


def _check_range(a: PackedArray, offset: int, n: int) -> None:
    if offset < 0 or offset + n > a.len:
        raise ValueError(f"range [{offset}, {offset + n}) exceeds array length {a.len}")


def pack_stream(
    dst: PackedArray,
    src: np.ndarray,
    mode: RoundingMode = RoundingMode.NearestEvenExact,
    *,
    offset: int = 0,
    vector_bytes: int = DEFAULT_VECTOR_BYTES,
) -> None:
    """Round ``src`` into ``dst[offset : offset + len(src)]``.

    Whole blocks go through the vector engine as consecutive,
    non-overlapping ``n_out * V`` byte stores; the remainder is written one
    element at a time.
    """
    fmt = dst.fmt
    src = np.ascontiguousarray(_as_bits(src, fmt)).reshape(-1)
    n = src.shape[0]
    _check_range(dst, offset, n)
    plan = build_pack_plan(fmt, vector_bytes)
    body = n - n % plan.group_elements
    if body:
        start = offset * fmt.nbytes
        out = dst.payload[start : start + body * fmt.nbytes]
        _backend.get().pack_groups(src[:body], out, *plan.arrays, plan.vectors_in, plan.vectors_out,
                                   plan.vector_bytes, fmt.shift, int(mode))
    if body < n:
        pack_scalar(dst, src[body:], mode, offset + body)


def unpack_stream(
    src: PackedArray,
    dst: np.ndarray | None = None,
    *,
    offset: int = 0,
    count: int | None = None,
    vector_bytes: int = DEFAULT_VECTOR_BYTES,
) -> np.ndarray:
    """Widen ``src[offset : offset + n]`` into ``dst`` (allocated when omitted) and return it."""
    fmt = src.fmt
    if dst is None:
        n = src.len - offset if count is None else count
        dst = np.empty(n, dtype=parent_uint(fmt))
    out = _as_bits(dst, fmt, writable=True)
    if not out.flags.c_contiguous or out.ndim != 1:
        raise ValueError("dst must be a contiguous 1-D array")
    n = out.shape[0]
    _check_range(src, offset, n)
    plan = build_unpack_plan(fmt, vector_bytes)
    body = n - n % plan.group_elements
    if body:
        start = offset * fmt.nbytes
        packed = src.payload[start : start + body * fmt.nbytes]
        _backend.get().unpack_groups(packed, out[:body], *plan.arrays, plan.vectors_in, plan.vectors_out,
                                     plan.vector_bytes)
    if body < n:
        unpack_scalar(src, out[body:], offset + body)
    return dst
