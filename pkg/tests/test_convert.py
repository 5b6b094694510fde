from fractions import Fraction

import numpy as np
import pytest
from conftest import NARROW_FORMATS, random_patterns, uint_for
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import rational_nearest_even

from flytes.convert import (
    RoundingMode,
    bits_to_float,
    float_to_bits,
    narrow,
    narrow_array,
    round_decompose,
    widen,
    widen_array,
)
from flytes.formats import FloatClass, classify, decode, format_of

TZ = RoundingMode.TowardZero
RNE = RoundingMode.NearestEvenExact
HEUR = RoundingMode.NearestHeuristic
ODD = RoundingMode.ToOdd

F24 = format_of("flyte24")
F40 = format_of("flyte40")


def test_widen_examples():
    assert widen(0x3F8000, F24) == 0x3F800000
    assert widen(0x000000, F24) == 0
    assert widen(0xFFF0000000, F40) == 0xFFF0000000000000
    assert classify(0xFFF0000000000000, F40.parent) is FloatClass.NegativeInfinity


@pytest.mark.parametrize(
    "mode,src,expected",
    [
        (TZ, 0x3F800001, 0x3F8000),
        (TZ, 0x7F8000FF, 0x7F8000),
        (TZ, 0x000000FF, 0x000000),
        (HEUR, 0x3F800080, 0x3F8001),
        (HEUR, 0x3F80007F, 0x3F8000),
        (RNE, 0x3F800080, 0x3F8000),
        (RNE, 0x3F800180, 0x3F8002),
        (RNE, 0x7FFFFFFF, 0x7FFFFF),
    ],
)
def test_narrow_examples(mode, src, expected):
    assert narrow(src, F24, mode) == expected
    got = narrow_array(np.array([src], dtype=np.uint32), F24, mode)
    assert got.tolist() == [expected]


def test_narrow_example_classes():
    assert classify(narrow(0x7F8000FF, F24, TZ), F24) is FloatClass.PositiveInfinity
    assert classify(narrow(0x7FFFFFFF, F24, RNE), F24) is FloatClass.QuietNaN


def test_derived_examples_match_oracles():
    # add-half-ULP is plain integer arithmetic
    assert (0x3F800080 + 0x80) >> 8 == 0x3F8001
    assert (0x3F80007F + 0x80) >> 8 == 0x3F8000
    assert rational_nearest_even(0x3F800080, F24) == 0x3F8000
    assert rational_nearest_even(0x3F800180, F24) == 0x3F8002


def test_heuristic_wraps_like_unsigned_add():
    # all-ones NaN carries out of the sign bit and wraps to +0
    assert narrow(0xFFFFFFFF, F24, HEUR) == 0x000000
    assert narrow(0x7FFFFF80, F24, HEUR) == 0x800000


@pytest.mark.parametrize(
    "src,kept,g,r,s",
    [
        (0x3F800080, 0x3F8000, 1, 0, 0),
        (0x3F8000FF, 0x3F8000, 1, 1, 1),
        (0x3F800000, 0x3F8000, 0, 0, 0),
        (0x3F800141, 0x3F8001, 0, 1, 1),
    ],
)
def test_round_decompose(src, kept, g, r, s):
    d = round_decompose(src, F24)
    assert (d.kept_bits, d.guard, d.round, d.sticky) == (kept, g, r, s)
    assert d.pre_guard == kept & 1


@given(st.integers(0, 2**64 - 1), st.sampled_from(["flyte40", "flyte48", "flyte56"]))
def test_round_decompose_reassembles(bits, name):
    fmt = format_of(name)
    d = round_decompose(bits, fmt)
    D = fmt.shift
    discarded = bits & ((1 << D) - 1)
    assert (d.kept_bits << D) | discarded == bits
    assert d.guard == discarded >> (D - 1)
    assert d.round == (discarded >> (D - 2)) & 1
    assert d.sticky == int(discarded & ((1 << (D - 2)) - 1) != 0)


def test_identity_formats_are_identity(rng):
    for name in ("f32", "f64"):
        fmt = format_of(name)
        bits = random_patterns(rng, fmt, 1000)
        for mode in RoundingMode:
            assert np.array_equal(narrow_array(bits, fmt, mode), bits)
            assert narrow(int(bits[0]), fmt, mode) == int(bits[0])


@pytest.mark.parametrize("name", NARROW_FORMATS)
@pytest.mark.parametrize("mode", list(RoundingMode))
def test_array_matches_scalar(name, mode, rng):
    fmt = format_of(name)
    bits = random_patterns(rng, fmt, 3000)
    arr = narrow_array(bits, fmt, mode).tolist()
    assert arr == [narrow(b, fmt, mode) for b in bits.tolist()]


@pytest.mark.parametrize("name", NARROW_FORMATS)
def test_truncation_bit_identity(name, rng):
    fmt = format_of(name)
    u = uint_for(fmt)
    bits = random_patterns(rng, fmt, 100_000)
    back = widen_array(narrow_array(bits, fmt, TZ), fmt)
    assert np.array_equal(back, bits & ~u((1 << fmt.shift) - 1))


@settings(max_examples=300)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["flyte16", "flyte24"]))
def test_rne_matches_rational_oracle_f32(bits, name):
    fmt = format_of(name)
    if decode(bits, fmt.parent).real_value is None:
        return
    assert narrow(bits, fmt, RNE) == rational_nearest_even(bits, fmt)


@settings(max_examples=300)
@given(st.integers(0, 2**64 - 1), st.sampled_from(["flyte40", "flyte48", "flyte56"]))
def test_rne_matches_rational_oracle_f64(bits, name):
    fmt = format_of(name)
    if decode(bits, fmt.parent).real_value is None:
        return
    assert narrow(bits, fmt, RNE) == rational_nearest_even(bits, fmt)


@given(st.integers(0, 2**32 - 1))
def test_to_odd(bits):
    kept = bits >> 8
    got = narrow(bits, F24, ODD)
    if classify(bits, F24.parent).is_finite:
        assert got == kept | int(bits & 0xFF != 0)
    else:
        assert got == kept


@given(st.integers(0, 2**32 - 1), st.sampled_from(list(RoundingMode)))
def test_sign_preservation(bits, mode):
    out = narrow(bits, F24, mode)
    if mode is HEUR and classify(bits, F24.parent).is_nan:
        return
    assert out >> 23 == bits >> 31


@given(st.floats(width=32, allow_nan=False, allow_infinity=False),
       st.floats(width=32, allow_nan=False, allow_infinity=False))
def test_monotonic(a, b):
    if a > b:
        a, b = b, a
    for name in ("flyte16", "flyte24"):
        fmt = format_of(name)
        ra = bits_to_float(widen(narrow(float_to_bits(a), fmt, RNE), fmt))
        rb = bits_to_float(widen(narrow(float_to_bits(b), fmt, RNE), fmt))
        assert ra <= rb


@given(st.floats(allow_nan=False, allow_infinity=False), st.sampled_from(["flyte40", "flyte48", "flyte56"]))
def test_relative_error_bound(x, name):
    fmt = format_of(name)
    bits = float_to_bits(x, "f64")
    if classify(bits, fmt.parent) is not FloatClass.Normal:
        return
    out = widen(narrow(bits, fmt, RNE), fmt)
    if classify(out, fmt.parent) is not FloatClass.Normal:
        return
    v, r = decode(bits, fmt.parent).real_value, decode(out, fmt.parent).real_value
    assert abs(r - v) / abs(v) <= Fraction(1, 2 ** (fmt.mantissa_bits + 1))


def test_overflow_to_infinity():
    # largest binary32 rounds up past the largest flyte24
    assert narrow(0x7F7FFFFF, F24, RNE) == 0x7F8000
    assert narrow(0xFF7FFFFF, F24, RNE) == 0xFF8000
    assert narrow(0x7F7FFF80, F24, RNE) == 0x7F8000  # tie, odd kept LSB
    assert narrow(0x7F7FFE80, F24, RNE) == 0x7F7FFE  # tie, even kept LSB


def test_subnormal_rounding():
    assert narrow(0x007FFFFF, F24, RNE) == 0x008000  # up to the smallest normal
    assert classify(0x008000, F24) is FloatClass.Normal
    assert narrow(0x0000007F, F24, RNE) == 0x000000
    assert narrow(0x00000081, F24, RNE) == 0x000001
