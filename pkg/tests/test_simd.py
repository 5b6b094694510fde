import numpy as np
import pytest
from conftest import FORMAT_NAMES, random_patterns
from hypothesis import given, settings
from hypothesis import strategies as st

from flytes.convert import RoundingMode, narrow_array, widen_array
from flytes.formats import format_of
from flytes.packed import PackedArray, packed_get
from flytes.simd import (
    build_pack_plan,
    build_unpack_plan,
    execute_symbolic,
    pack_block,
    pack_scalar,
    pack_stream,
    unpack_block,
    unpack_scalar,
    unpack_stream,
)


@pytest.mark.parametrize(
    "name,V,n_in,n_out",
    [("flyte24", 16, 4, 3), ("flyte40", 16, 8, 5), ("flyte48", 16, 4, 3), ("f32", 16, 1, 1),
     ("flyte16", 16, 2, 1), ("flyte56", 16, 8, 7), ("f64", 16, 1, 1), ("flyte24", 32, 4, 3),
     ("flyte40", 32, 8, 5)],
)
def test_block_counts(name, V, n_in, n_out):
    fmt = format_of(name)
    for plan in (build_pack_plan(fmt, V), build_unpack_plan(fmt, V)):
        assert (plan.vectors_in, plan.vectors_out) == (n_in, n_out)
        assert plan.vectors_in * plan.lanes_per_vector * fmt.nbytes == plan.vectors_out * V


def test_bad_vector_sizes():
    with pytest.raises(ValueError):
        build_pack_plan("flyte40", 4)
    with pytest.raises(ValueError):
        build_pack_plan("flyte24", 24)


def _expected_packed_labels(fmt, plan):
    D8 = fmt.shift // 8
    return [(e, D8 + b) for e in range(plan.group_elements) for b in range(fmt.nbytes)]


@pytest.mark.parametrize("name", FORMAT_NAMES)
@pytest.mark.parametrize("V", [16, 32, 64])
def test_symbolic_pack_is_gap_free_and_ordered(name, V):
    fmt = format_of(name)
    plan = build_pack_plan(fmt, V)
    L, P = plan.lanes_per_vector, fmt.parent_bytes
    regs = [[(k * L + l, b) for l in range(L) for b in range(P)] for k in range(plan.vectors_in)]
    out = execute_symbolic(plan, regs)
    flat = [x for v in out for x in v]
    assert flat == _expected_packed_labels(fmt, plan)


@pytest.mark.parametrize("name", FORMAT_NAMES)
@pytest.mark.parametrize("V", [16, 32, 64])
def test_symbolic_unpack_inverts(name, V):
    fmt = format_of(name)
    plan = build_unpack_plan(fmt, V)
    labels = _expected_packed_labels(fmt, plan)
    vecs = [labels[q * V : (q + 1) * V] for q in range(plan.vectors_out)]
    lanes = execute_symbolic(plan, vecs, zero="0")
    D8, P, L = fmt.shift // 8, fmt.parent_bytes, plan.lanes_per_vector
    for k, reg in enumerate(lanes):
        for l in range(L):
            e = k * L + l
            lane = reg[l * P : (l + 1) * P]
            assert lane == ["0"] * D8 + [(e, b) for b in range(D8, P)]


@pytest.mark.parametrize("name", FORMAT_NAMES)
def test_block_roundtrip(name, backend, rng):
    fmt = format_of(name)
    pp, up = build_pack_plan(fmt), build_unpack_plan(fmt)
    lanes = random_patterns(rng, fmt, pp.group_elements).reshape(pp.vectors_in, -1)
    for mode in RoundingMode:
        packed = pack_block(pp, lanes, mode)
        assert packed.shape == (pp.vectors_out, pp.vector_bytes)
        back = unpack_block(up, packed)
        expected = widen_array(narrow_array(lanes.reshape(-1), fmt, mode), fmt)
        assert np.array_equal(back.reshape(-1), expected)


def _scalar_reference(fmt, src, mode):
    ref = PackedArray(fmt, len(src))
    pack_scalar(ref, src, mode)
    return ref


@pytest.mark.parametrize("name", FORMAT_NAMES)
@pytest.mark.parametrize("n", [0, 1, 17, 100, 333])
@pytest.mark.parametrize("V", [16, 32])
def test_stream_matches_scalar(name, n, V, backend, rng):
    fmt = format_of(name)
    src = random_patterns(rng, fmt, n)
    for mode in RoundingMode:
        ref = _scalar_reference(fmt, src, mode)
        a = PackedArray(fmt, n)
        pack_stream(a, src, mode, vector_bytes=V)
        assert a == ref
        got = unpack_stream(a, vector_bytes=V)
        want = unpack_scalar(ref, np.empty(n, dtype=src.dtype))
        assert np.array_equal(got, want)


@pytest.mark.parametrize("name", ["flyte24", "flyte40", "flyte56"])
def test_stream_offsets_leave_neighbours(name, backend, rng):
    fmt = format_of(name)
    a = PackedArray(fmt, 200)
    a.payload[: 200 * fmt.nbytes] = rng.integers(0, 256, size=200 * fmt.nbytes, dtype=np.uint8)
    before = a.copy()
    src = random_patterns(rng, fmt, 90)
    pack_stream(a, src, offset=33)
    B = fmt.nbytes
    assert np.array_equal(a.payload[: 33 * B], before.payload[: 33 * B])
    assert np.array_equal(a.payload[123 * B :], before.payload[123 * B :])
    got = unpack_stream(a, offset=33, count=90)
    assert got.tolist() == [packed_get(a, 33 + i) for i in range(90)]


def test_stream_range_checks():
    a = PackedArray("flyte24", 10)
    with pytest.raises(ValueError):
        pack_stream(a, np.zeros(11, dtype=np.float32))
    with pytest.raises(ValueError):
        unpack_stream(a, offset=5, count=6)
    with pytest.raises(TypeError):
        pack_stream(a, np.zeros(3, dtype=np.float64))
    with pytest.raises(TypeError):
        unpack_stream(a, np.empty(3, dtype=np.int64))


@pytest.mark.parametrize("name", ["flyte24", "flyte40"])
def test_inplace_repack_is_stable(name, backend, rng):
    fmt = format_of(name)
    src = random_patterns(rng, fmt, 1000)
    a = PackedArray(fmt, 1000)
    pack_stream(a, src)
    snapshot = a.copy()
    for mode in RoundingMode:
        pack_stream(a, unpack_stream(a), mode)
        assert a == snapshot


def test_float_inputs_accepted(backend):
    a = PackedArray("flyte24", 8)
    pack_stream(a, np.arange(8, dtype=np.float32))
    out = unpack_stream(a, np.empty(8, dtype=np.float32))
    assert out.tolist() == list(range(8))


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(FORMAT_NAMES), st.integers(0, 150), st.integers(0, 2**32 - 1),
       st.sampled_from(list(RoundingMode)))
def test_stream_property(name, n, seed, mode):
    fmt = format_of(name)
    src = random_patterns(np.random.default_rng(seed), fmt, n)
    a = PackedArray(fmt, n)
    pack_stream(a, src, mode)
    assert a == _scalar_reference(fmt, src, mode)
