"""Flyte format descriptors and IEEE-754 bit-field semantics.

A flyte is a truncated-mantissa storage format that keeps the sign and
exponent layout of its parent native type (binary32 or binary64) and drops
whole bytes from the low end of the mantissa.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

__all__ = [
    "FlyteFormat",
    "FloatClass",
    "DecodedValue",
    "UnknownFormatError",
    "FORMATS",
    "TABLE_ORDER",
    "format_of",
    "classify",
    "decode",
]


class UnknownFormatError(KeyError):
    pass


@dataclass(frozen=True)
class FlyteFormat:
    name: str
    total_bits: int
    exponent_bits: int
    mantissa_bits: int
    bias: int
    parent_bits: int
    sign_bits: int = 1

    def __post_init__(self) -> None:
        if self.total_bits != self.sign_bits + self.exponent_bits + self.mantissa_bits:
            raise ValueError(f"{self.name}: field widths do not sum to {self.total_bits}")
        if self.total_bits % 8 or not 16 <= self.total_bits <= self.parent_bits:
            raise ValueError(f"{self.name}: bad total width {self.total_bits}")
        if self.parent_bits not in (32, 64):
            raise ValueError(f"{self.name}: parent must be 32 or 64 bits")

    # Derived widths used all over the place.

    @property
    def nbytes(self) -> int:
        """Stored element width B in bytes."""
        return self.total_bits // 8

    @property
    def parent_bytes(self) -> int:
        return self.parent_bits // 8

    @property
    def shift(self) -> int:
        """Number of discarded low parent bits, D = parent_bits - total_bits."""
        return self.parent_bits - self.total_bits

    @property
    def is_identity(self) -> bool:
        return self.shift == 0

    @property
    def max_exponent_field(self) -> int:
        return (1 << self.exponent_bits) - 1

    @property
    def parent(self) -> "FlyteFormat":
        return F32 if self.parent_bits == 32 else F64

    def __repr__(self) -> str:
        return f"FlyteFormat({self.name})"


F16 = FlyteFormat("flyte16", 16, 8, 7, 127, 32)
F24 = FlyteFormat("flyte24", 24, 8, 15, 127, 32)
F32 = FlyteFormat("f32", 32, 8, 23, 127, 32)
F40 = FlyteFormat("flyte40", 40, 11, 28, 1023, 64)
F48 = FlyteFormat("flyte48", 48, 11, 36, 1023, 64)
F56 = FlyteFormat("flyte56", 56, 11, 44, 1023, 64)
F64 = FlyteFormat("f64", 64, 11, 52, 1023, 64)

# Ordering is persisted as the format id byte of the FLYT container.
TABLE_ORDER: tuple[FlyteFormat, ...] = (F16, F24, F32, F40, F48, F56, F64)

FORMATS: dict[str, FlyteFormat] = {f.name: f for f in TABLE_ORDER}
_ALIASES = {"flyte32": "f32", "flyte64": "f64"}


def format_of(name: str | FlyteFormat) -> FlyteFormat:
    """Look up a format by name (``f32``, ``flyte24``, ...).

    ``flyte32`` and ``flyte64`` are accepted as aliases for the native
    formats. Passing a :class:`FlyteFormat` returns it unchanged.
    """
    if isinstance(name, FlyteFormat):
        return name
    key = _ALIASES.get(name, name)
    try:
        return FORMATS[key]
    except KeyError:
        raise UnknownFormatError(f"unknown flyte format {name!r}") from None


class FloatClass(enum.Enum):
    PositiveZero = "+zero"
    NegativeZero = "-zero"
    Subnormal = "subnormal"
    Normal = "normal"
    PositiveInfinity = "+inf"
    NegativeInfinity = "-inf"
    QuietNaN = "qnan"
    SignallingNaN = "snan"

    @property
    def is_nan(self) -> bool:
        return self in (FloatClass.QuietNaN, FloatClass.SignallingNaN)

    @property
    def is_infinite(self) -> bool:
        return self in (FloatClass.PositiveInfinity, FloatClass.NegativeInfinity)

    @property
    def is_zero(self) -> bool:
        return self in (FloatClass.PositiveZero, FloatClass.NegativeZero)

    @property
    def is_finite(self) -> bool:
        return not (self.is_nan or self.is_infinite)


def _fields(bits: int, fmt: FlyteFormat) -> tuple[int, int, int]:
    if bits < 0 or bits >> fmt.total_bits:
        raise ValueError(f"0x{bits:x} does not fit in {fmt.total_bits} bits")
    m = fmt.mantissa_bits
    sign = bits >> (fmt.total_bits - 1)
    exp = (bits >> m) & fmt.max_exponent_field
    mant = bits & ((1 << m) - 1)
    return sign, exp, mant


def classify(bits: int, fmt: FlyteFormat) -> FloatClass:
    sign, exp, mant = _fields(bits, fmt)
    if exp == fmt.max_exponent_field:
        if mant == 0:
            return FloatClass.NegativeInfinity if sign else FloatClass.PositiveInfinity
        if mant >> (fmt.mantissa_bits - 1):
            return FloatClass.QuietNaN
        return FloatClass.SignallingNaN
    if exp == 0:
        if mant == 0:
            return FloatClass.NegativeZero if sign else FloatClass.PositiveZero
        return FloatClass.Subnormal
    return FloatClass.Normal


@dataclass(frozen=True)
class DecodedValue:
    sign: int  # +1 or -1
    exponent_field: int
    mantissa_field: int
    value_class: FloatClass
    # Exact value for finite classes; None for infinities and NaNs.
    real_value: Optional[Fraction]


def decode(bits: int, fmt: FlyteFormat) -> DecodedValue:
    """Split ``bits`` into fields and evaluate the value exactly.

    Normal numbers are ``(-1)^s * (1 + m / 2^M) * 2^(e - bias)``; subnormals
    drop the implied leading one and use exponent ``1 - bias``.
    """
    s, e, m = _fields(bits, fmt)
    cls = classify(bits, fmt)
    sign = -1 if s else 1
    value: Optional[Fraction] = None
    if cls.is_finite:
        M = fmt.mantissa_bits
        if e == 0:
            significand, exp = m, 1 - fmt.bias - M
        else:
            significand, exp = (1 << M) | m, e - fmt.bias - M
        value = Fraction(significand) * (Fraction(2) ** exp) * sign
    return DecodedValue(sign, e, m, cls, value)
