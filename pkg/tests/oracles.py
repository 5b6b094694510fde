"""Reference implementations used only by the tests.

None of these share code with the rounding or packing paths they check:
rounding oracles select the nearest representable value by exact
arithmetic, and the byte oracles assemble elements one byte at a time.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from flytes.formats import FlyteFormat, decode


def round_rational(value: Fraction, negative: bool, fmt: FlyteFormat) -> int:
    """Ties-to-even rounding of an exact rational into ``fmt``; returns flyte bits."""
    M, bias = fmt.mantissa_bits, fmt.bias
    sign = int(negative) << (fmt.total_bits - 1)
    a = abs(value)
    if a == 0:
        return sign
    e = a.numerator.bit_length() - a.denominator.bit_length()
    if Fraction(2) ** e > a:
        e -= 1
    e = max(e, 1 - bias)
    n = round(a / Fraction(2) ** (e - M))  # Fraction rounds half to even
    if n == 1 << (M + 1):
        n >>= 1
        e += 1
    if e > bias:
        return sign | (fmt.max_exponent_field << M)
    if n < 1 << M:
        return sign | n
    return sign | ((e + bias) << M) | (n - (1 << M))


def rational_nearest_even(parent_bits: int, fmt: FlyteFormat) -> int:
    d = decode(parent_bits, fmt.parent)
    assert d.real_value is not None, "finite inputs only"
    return round_rational(d.real_value, d.sign < 0, fmt)


def neighbor_nearest_even(bits: np.ndarray, fmt: FlyteFormat) -> np.ndarray:
    """Vectorised ties-to-even oracle for finite parent patterns.

    Brackets ``|x|`` between consecutive multiples ``lo = n*q`` and
    ``hi = (n+1)*q`` of the flyte quantum ``q`` for its binade and picks the
    closer one. Every difference involved is exact in binary64 (the
    operands share a binade or are multiples of the smallest subnormal);
    the top binade is evaluated at half scale so ``hi`` cannot overflow.
    """
    M, bias = fmt.mantissa_bits, fmt.bias
    pdt = np.float32 if fmt.parent_bits == 32 else np.float64
    u = np.uint32 if fmt.parent_bits == 32 else np.uint64
    x = np.asarray(bits, dtype=u).view(pdt).astype(np.float64)
    assert np.isfinite(x).all()
    neg = np.signbit(x)
    a = np.abs(x)
    _, E = np.frexp(a)
    e = np.maximum(E.astype(np.int64) - 1, 1 - bias)
    q = np.ldexp(1.0, e - M)
    n = np.floor(a / q)
    s = np.where(e >= bias, 0.5, 1.0)
    d_lo = a * s - n * (q * s)
    d_hi = (n + 1) * (q * s) - a * s
    up = (d_hi < d_lo) | ((d_hi == d_lo) & (np.fmod(n, 2) == 1))
    r = np.where(up, n + 1, n) * q
    r = np.where(neg, -r, r)
    with np.errstate(over="ignore"):
        out = r.astype(pdt).view(u)
    low = u((1 << fmt.shift) - 1)
    assert not (out & low).any(), "oracle produced a value the flyte cannot hold"
    return out >> u(fmt.shift)


def bytewise_get(payload: np.ndarray, i: int, fmt: FlyteFormat) -> int:
    """Element ``i`` widened, assembled one byte at a time."""
    B = fmt.nbytes
    v = 0
    for b in range(B):
        v |= int(payload[i * B + b]) << (8 * b)
    return v << fmt.shift
