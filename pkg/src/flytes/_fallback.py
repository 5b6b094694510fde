"""numpy implementation of the hot kernels.

Mirrors the signatures of the compiled ``_core`` module. Each pack/unpack
call processes every block of the stream at once: one fancy-indexed gather
per register for the permute phase and one masked copy per blend step.
"""

from __future__ import annotations

import numpy as np

from .convert import RoundingMode, narrow, narrow_array
from .formats import TABLE_ORDER, FlyteFormat


def _format(parent_bits: int, shift: int) -> FlyteFormat:
    for fmt in TABLE_ORDER:
        if fmt.parent_bits == parent_bits and fmt.shift == shift:
            return fmt
    raise ValueError(f"no format with parent {parent_bits} and shift {shift}")


def round_lanes(lanes: np.ndarray, shift: int, mode: int) -> np.ndarray:
    """Round parent patterns in place of their lanes (low ``shift`` bits cleared)."""
    if shift == 0:
        return lanes
    fmt = _format(lanes.dtype.itemsize * 8, shift)
    u = lanes.dtype.type
    return narrow_array(lanes, fmt, RoundingMode(mode)) << u(shift)


def _gather(regs: np.ndarray, perm: np.ndarray) -> np.ndarray:
    n_in = perm.shape[0]
    zero = perm < 0
    out = regs[:, np.arange(n_in)[:, None], np.where(zero, 0, perm)]
    out[:, zero] = 0
    return out


def pack_groups(lanes, out, perm, bdst, bsrc, bsel, n_in, n_out, V, shift, mode):
    lanes = np.ascontiguousarray(lanes)
    G = lanes.size * lanes.dtype.itemsize // (n_in * V)
    if G == 0:
        return
    regs = round_lanes(lanes, shift, mode).view(np.uint8).reshape(G, n_in, V)
    permuted = _gather(regs, perm)
    packed = np.zeros((G, n_out, V), dtype=np.uint8)
    for d, s, sel in zip(bdst.tolist(), bsrc.tolist(), bsel.astype(bool)):
        packed[:, d, sel] = permuted[:, s, sel]
    out[: G * n_out * V] = packed.reshape(-1)


def unpack_groups(src, lanes, perm, bdst, bsrc, bsel, n_in, n_out, V):
    G = src.size // (n_out * V)
    if G == 0:
        return
    packed = np.asarray(src[: G * n_out * V]).reshape(G, n_out, V)
    combined = np.zeros((G, n_in, V), dtype=np.uint8)
    for d, s, sel in zip(bdst.tolist(), bsrc.tolist(), bsel.astype(bool)):
        combined[:, d, sel] = packed[:, s, sel]
    lanes.view(np.uint8)[: G * n_in * V] = _gather(combined, perm).reshape(-1)


def accumulate(terms: np.ndarray, shift: int, mode: int, round_each: bool):
    """Left-to-right ``s = s + t`` starting from zero, optionally narrowing ``s`` after every add."""
    dt = terms.dtype.type
    if not round_each or shift == 0:
        if terms.size == 0:
            return dt(0)
        return np.add.accumulate(np.concatenate(([dt(0)], terms)))[-1]
    fmt = _format(terms.dtype.itemsize * 8, shift)
    u = np.uint32 if fmt.parent_bits == 32 else np.uint64
    m = RoundingMode(mode)
    s = dt(0)
    for t in terms:
        s = s + t
        s = u(narrow(int(s.view(u)), fmt, m) << shift).view(dt)
    return s


def row_dots(A: np.ndarray, x: np.ndarray, y: np.ndarray, unroll: int, vf: int) -> None:
    rows, cols = A.shape
    acc = np.zeros(rows, dtype=A.dtype)
    step = unroll * vf
    for j0 in range(0, cols, step):
        for j in range(j0, min(j0 + step, cols)):
            acc += A[:, j] * x[j]
    y[:] = acc


def matmul(A: np.ndarray, B: np.ndarray, C: np.ndarray, unroll: int, vf: int) -> None:
    n, k = A.shape
    acc = np.zeros((n, B.shape[1]), dtype=A.dtype)
    step = unroll * vf
    for k0 in range(0, k, step):
        for kk in range(k0, min(k0 + step, k)):
            acc += np.multiply.outer(A[:, kk], B[kk, :])
    C[:] = acc
