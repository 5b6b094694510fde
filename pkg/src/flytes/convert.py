"""Bit-exact conversion between flytes and their parent native formats.

Widening is a left shift that pads the mantissa with zeros. Narrowing
discards the low ``D = parent_bits - total_bits`` bits using one of the
:class:`RoundingMode` strategies. Every function here works on unsigned bit
patterns (Python ints, or numpy ``uint32``/``uint64`` arrays for the
``*_array`` variants), never on host floats.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass

import numpy as np

from .formats import FlyteFormat, format_of

__all__ = [
    "RoundingMode",
    "RoundDecomposition",
    "widen",
    "narrow",
    "round_decompose",
    "widen_array",
    "narrow_array",
    "classify_array",
    "parent_dtype",
    "parent_uint",
    "float_to_bits",
    "bits_to_float",
]


class RoundingMode(enum.IntEnum):
    TowardZero = 0
    NearestEvenExact = 1
    NearestHeuristic = 2
    ToOdd = 3

    @property
    def cli_name(self) -> str:
        return _CLI_NAMES[self]

    @classmethod
    def parse(cls, name: "str | RoundingMode") -> "RoundingMode":
        if isinstance(name, RoundingMode):
            return name
        for mode, alias in _CLI_NAMES.items():
            if name in (alias, mode.name):
                return mode
        raise ValueError(f"unknown rounding mode {name!r}")


_CLI_NAMES = {
    RoundingMode.TowardZero: "toward-zero",
    RoundingMode.NearestEvenExact: "nearest-even",
    RoundingMode.NearestHeuristic: "nearest-heuristic",
    RoundingMode.ToOdd: "to-odd",
}


@dataclass(frozen=True)
class RoundDecomposition:
    kept_bits: int
    pre_guard: int
    guard: int
    round: int
    sticky: int


def _parent_fields(fmt: FlyteFormat) -> tuple[int, int]:
    p = fmt.parent
    exp_mask = p.max_exponent_field << p.mantissa_bits
    return exp_mask, (1 << p.mantissa_bits) - 1


def widen(bits: int, fmt: FlyteFormat) -> int:
    if bits < 0 or bits >> fmt.total_bits:
        raise ValueError(f"0x{bits:x} does not fit in {fmt.total_bits} bits")
    return bits << fmt.shift


def narrow(bits: int, fmt: FlyteFormat, mode: RoundingMode = RoundingMode.NearestEvenExact) -> int:
    """Round a parent bit pattern down to ``fmt``.

    ``NearestHeuristic`` adds half an ULP and truncates with wraparound, so
    NaNs with an all-ones kept mantissa can carry into the exponent and sign.
    ``NearestEvenExact`` and ``ToOdd`` leave NaNs and infinities truncated.
    """
    if bits < 0 or bits >> fmt.parent_bits:
        raise ValueError(f"0x{bits:x} does not fit in {fmt.parent_bits} bits")
    d = fmt.shift
    if d == 0:
        return bits
    kept = bits >> d
    if mode == RoundingMode.TowardZero:
        return kept
    if mode == RoundingMode.NearestHeuristic:
        full = (1 << fmt.parent_bits) - 1
        return ((bits + (1 << (d - 1))) & full) >> d

    exp_mask, _ = _parent_fields(fmt)
    if bits & exp_mask == exp_mask:
        return kept
    discarded = bits & ((1 << d) - 1)
    if mode == RoundingMode.ToOdd:
        return kept | (discarded != 0)
    half = 1 << (d - 1)
    if discarded > half or (discarded == half and kept & 1):
        # carry out of an all-ones mantissa lands in the exponent (overflow to inf)
        kept += 1
    return kept


def round_decompose(bits: int, fmt: FlyteFormat) -> RoundDecomposition:
    d = fmt.shift
    kept = bits >> d
    if d == 0:
        return RoundDecomposition(kept, kept & 1, 0, 0, 0)
    guard = (bits >> (d - 1)) & 1
    rnd = (bits >> (d - 2)) & 1 if d >= 2 else 0
    sticky = int(d >= 3 and bits & ((1 << (d - 2)) - 1) != 0)
    return RoundDecomposition(kept, kept & 1, guard, rnd, sticky)


# ---------------------------------------------------------------------------
# numpy array paths
# ---------------------------------------------------------------------------


def parent_uint(fmt: FlyteFormat) -> type:
    return np.uint32 if fmt.parent_bits == 32 else np.uint64


def parent_dtype(fmt: FlyteFormat) -> type:
    return np.float32 if fmt.parent_bits == 32 else np.float64


def widen_array(elems: np.ndarray, fmt: FlyteFormat) -> np.ndarray:
    u = parent_uint(fmt)
    return np.left_shift(elems.astype(u, copy=False), u(fmt.shift))


def narrow_array(
    bits: np.ndarray, fmt: FlyteFormat, mode: RoundingMode = RoundingMode.NearestEvenExact
) -> np.ndarray:
    """Vectorized :func:`narrow`; returns right-aligned element bits in the parent uint dtype."""
    u = parent_uint(fmt)
    bits = np.asarray(bits, dtype=u)
    d = fmt.shift
    if d == 0:
        return bits.copy()
    D = u(d)
    kept = bits >> D
    if mode == RoundingMode.TowardZero:
        return kept
    if mode == RoundingMode.NearestHeuristic:
        return (bits + u(1 << (d - 1))) >> D  # uint addition wraps

    exp_mask, _ = _parent_fields(fmt)
    special = (bits & u(exp_mask)) == u(exp_mask)
    discarded = bits & u((1 << d) - 1)
    if mode == RoundingMode.ToOdd:
        bump = discarded != 0
        return np.where(special, kept, kept | bump.astype(u))
    half = u(1 << (d - 1))
    up = (discarded > half) | ((discarded == half) & ((kept & u(1)) == u(1)))
    up &= ~special
    return kept + up.astype(u)


def classify_array(bits: np.ndarray, fmt: FlyteFormat) -> np.ndarray:
    """Class codes per element, using the order of :class:`FloatClass` members.

    Codes: 0 +zero, 1 -zero, 2 subnormal, 3 normal, 4 +inf, 5 -inf, 6 qnan, 7 snan.
    """
    bits = np.asarray(bits).astype(np.uint64)
    m = fmt.mantissa_bits
    sign = (bits >> np.uint64(fmt.total_bits - 1)) & np.uint64(1)
    exp = (bits >> np.uint64(m)) & np.uint64(fmt.max_exponent_field)
    mant = bits & np.uint64((1 << m) - 1)
    quiet = (mant >> np.uint64(m - 1)) & np.uint64(1)
    out = np.full(bits.shape, 3, dtype=np.int8)
    top = exp == np.uint64(fmt.max_exponent_field)
    low = exp == np.uint64(0)
    zero_m = mant == np.uint64(0)
    out[low & zero_m] = 0
    out[low & zero_m & (sign == 1)] = 1
    out[low & ~zero_m] = 2
    out[top & zero_m] = 4
    out[top & zero_m & (sign == 1)] = 5
    out[top & ~zero_m & (quiet == 1)] = 6
    out[top & ~zero_m & (quiet == 0)] = 7
    return out


# ---------------------------------------------------------------------------
# host float helpers
# ---------------------------------------------------------------------------


def float_to_bits(value: float, fmt: FlyteFormat | str = "f32") -> int:
    """Parent-format bit pattern of a host float (rounded to binary32 for 32-bit parents)."""
    fmt = format_of(fmt)
    if fmt.parent_bits == 32:
        return struct.unpack("<I", struct.pack("<f", value))[0]
    return struct.unpack("<Q", struct.pack("<d", value))[0]


def bits_to_float(bits: int, fmt: FlyteFormat | str = "f32") -> float:
    fmt = format_of(fmt)
    if fmt.parent_bits == 32:
        return struct.unpack("<f", struct.pack("<I", bits))[0]
    return struct.unpack("<d", struct.pack("<Q", bits))[0]
