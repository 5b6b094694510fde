"""Unpadded byte-packed flyte arrays.

Element ``i`` lives in payload bytes ``[i*B, (i+1)*B)`` in little-endian
order. A few zero pad bytes follow the last element so that a parent-width
read starting at any element stays inside the buffer.
"""

from __future__ import annotations

import math
import struct
from typing import BinaryIO, Iterable

import numpy as np

from .convert import RoundingMode, narrow, narrow_array, parent_uint, widen_array
from .formats import TABLE_ORDER, FlyteFormat, format_of

__all__ = [
    "PackedArray",
    "FlyteFileError",
    "BadMagicError",
    "UnsupportedVersionError",
    "UnknownFormatIdError",
    "TruncatedPayloadError",
    "byte_size",
    "packed_new",
    "packed_get",
    "packed_set",
    "alignment_period",
    "packed_save",
    "packed_load",
]

MAGIC = b"FLYT"
VERSION = 0x01
_HEADER = struct.Struct("<4sBBQ")


class FlyteFileError(ValueError):
    """Base class for malformed FLYT containers."""


class BadMagicError(FlyteFileError):
    pass


class UnsupportedVersionError(FlyteFileError):
    pass


class UnknownFormatIdError(FlyteFileError):
    pass


class TruncatedPayloadError(FlyteFileError):
    pass


def byte_size(fmt: FlyteFormat, n: int) -> int:
    """Allocated bytes for ``n`` elements: ``n*B + (parent_bytes - B)``."""
    return n * fmt.nbytes + (fmt.parent_bytes - fmt.nbytes)


class PackedArray:
    """A sequence of flyte elements packed without padding.

    ``payload`` is a writable ``uint8`` numpy buffer of :func:`byte_size`
    bytes; the trailing pad is kept zero.
    """

    __slots__ = ("fmt", "len", "payload", "_read", "_view")

    def __init__(self, fmt: FlyteFormat | str, n: int, payload: np.ndarray | None = None):
        fmt = format_of(fmt)
        if n < 0:
            raise ValueError("length must be non-negative")
        size = byte_size(fmt, n)
        if payload is None:
            payload = np.zeros(size, dtype=np.uint8)
        elif payload.dtype != np.uint8 or payload.shape != (size,):
            raise ValueError(f"payload must be {size} uint8 bytes")
        self.fmt = fmt
        self.len = n
        self.payload = payload
        self._read = struct.Struct("<I" if fmt.parent_bits == 32 else "<Q").unpack_from
        self._view = memoryview(payload)

    def __len__(self) -> int:
        return self.len

    def __repr__(self) -> str:
        return f"PackedArray({self.fmt.name}, len={self.len})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PackedArray):
            return NotImplemented
        return (
            self.fmt == other.fmt
            and self.len == other.len
            and np.array_equal(self.payload, other.payload)
        )

    @property
    def nbytes(self) -> int:
        return self.payload.size

    @property
    def element_bytes(self) -> memoryview:
        """Logical payload (pad excluded)."""
        return self._view[: self.len * self.fmt.nbytes]

    def copy(self) -> "PackedArray":
        return PackedArray(self.fmt, self.len, self.payload.copy())

    def __getitem__(self, i: int) -> int:
        return packed_get(self, i)

    def __setitem__(self, i: int, parent_bits: int) -> None:
        packed_set(self, i, parent_bits)

    # Bulk helpers. These bypass the vector-block engine and are meant for
    # building inputs and inspecting results, not for kernels.

    def element_bits(self) -> np.ndarray:
        """Stored element bit patterns, right-aligned, as parent uints."""
        B = self.fmt.nbytes
        raw = np.asarray(self.payload[: self.len * B]).reshape(self.len, B)
        u = parent_uint(self.fmt)
        out = np.zeros(self.len, dtype=u)
        for b in range(B):
            out |= raw[:, b].astype(u) << u(8 * b)
        return out

    def to_parent_bits(self) -> np.ndarray:
        return widen_array(self.element_bits(), self.fmt)

    def to_numpy(self) -> np.ndarray:
        """Widened element values as a float32/float64 array."""
        bits = self.to_parent_bits()
        return bits.view(np.float32 if self.fmt.parent_bits == 32 else np.float64)

    def fill_elements(self, elems: np.ndarray) -> None:
        B = self.fmt.nbytes
        elems = np.asarray(elems, dtype=parent_uint(self.fmt))
        if elems.shape != (self.len,):
            raise ValueError("element count mismatch")
        le = elems.astype(elems.dtype.newbyteorder("<"), copy=False)
        raw = le.view(np.uint8).reshape(self.len, self.fmt.parent_bytes)
        self.payload[: self.len * B] = raw[:, :B].reshape(-1)

    @classmethod
    def from_values(
        cls,
        fmt: FlyteFormat | str,
        values: Iterable[float] | np.ndarray,
        mode: RoundingMode = RoundingMode.NearestEvenExact,
    ) -> "PackedArray":
        """Pack host floats, rounding each through the parent format first."""
        fmt = format_of(fmt)
        dt = np.float32 if fmt.parent_bits == 32 else np.float64
        vals = np.asarray(values, dtype=dt).reshape(-1)
        a = cls(fmt, vals.size)
        a.fill_elements(narrow_array(vals.view(parent_uint(fmt)), fmt, mode))
        return a


def packed_new(fmt: FlyteFormat | str, n: int) -> PackedArray:
    return PackedArray(fmt, n)


def _check_index(a: PackedArray, i: int) -> None:
    if not 0 <= i < a.len:
        raise IndexError(f"index {i} out of range for length {a.len}")


def packed_get(a: PackedArray, i: int) -> int:
    """Widened parent pattern of element ``i`` via one parent-width read."""
    _check_index(a, i)
    fmt = a.fmt
    word = a._read(a.payload, i * fmt.nbytes)[0]
    return (word & ((1 << fmt.total_bits) - 1)) << fmt.shift


def packed_set(
    a: PackedArray,
    i: int,
    parent_bits: int,
    mode: RoundingMode = RoundingMode.NearestEvenExact,
) -> None:
    _check_index(a, i)
    fmt = a.fmt
    B = fmt.nbytes
    elem = narrow(parent_bits, fmt, mode)
    a._view[i * B : (i + 1) * B] = elem.to_bytes(B, "little")


def alignment_period(fmt: FlyteFormat | str) -> int:
    fmt = format_of(fmt)
    return math.lcm(fmt.parent_bits, fmt.total_bits) // fmt.total_bits


def packed_save(a: PackedArray, sink: BinaryIO) -> None:
    """Write the FLYT container: magic, version, format id, u64 count, payload without pad."""
    fmt_id = TABLE_ORDER.index(a.fmt)
    sink.write(_HEADER.pack(MAGIC, VERSION, fmt_id, a.len))
    sink.write(a.element_bytes)


def _read_exact(source: BinaryIO, n: int) -> bytes:
    chunks = []
    while n:
        chunk = source.read(n)
        if not chunk:
            break
        chunks.append(chunk)
        n -= len(chunk)
    return b"".join(chunks)


def packed_load(source: BinaryIO) -> PackedArray:
    head = _read_exact(source, 4)
    if head != MAGIC:
        if len(head) < 4 and MAGIC.startswith(head):
            raise TruncatedPayloadError("stream ends inside the header")
        raise BadMagicError(f"bad magic {head!r}")
    rest = _read_exact(source, _HEADER.size - 4)
    if len(rest) >= 1 and rest[0] != VERSION:
        raise UnsupportedVersionError(f"unsupported container version {rest[0]}")
    if len(rest) >= 2 and rest[1] >= len(TABLE_ORDER):
        raise UnknownFormatIdError(f"unknown format id {rest[1]}")
    if len(rest) < _HEADER.size - 4:
        raise TruncatedPayloadError("stream ends inside the header")
    _, _, fmt_id, count = _HEADER.unpack(head + rest)
    fmt = TABLE_ORDER[fmt_id]
    want = count * fmt.nbytes
    body = _read_exact(source, want)
    if len(body) != want:
        raise TruncatedPayloadError(f"expected {want} payload bytes, got {len(body)}")
    a = PackedArray(fmt, count)
    a.payload[:want] = np.frombuffer(body, dtype=np.uint8)
    return a
