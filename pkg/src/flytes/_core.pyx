# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels. Same signatures and results as ``flytes._fallback``.

Pack and unpack walk the stream one block at a time, staging lanes in small
byte registers. Permutes are byte table lookups (zero fill reads a spare zero
slot); blends are masked 64-bit word selects.
Accumulators are strictly left to right; the build disables FP contraction
so products are rounded before every add, matching numpy.
"""

from libc.stdint cimport int16_t, int32_t, uint8_t, uint32_t, uint64_t
from libc.stdlib cimport free, malloc
from libc.string cimport memcpy, memset

ctypedef fused lane_t:
    uint32_t
    uint64_t

ctypedef fused real_t:
    float
    double


cdef inline lane_t _round(lane_t x, int shift, int mode, lane_t exp_mask) noexcept nogil:
    """Rounded parent pattern with the low ``shift`` bits cleared."""
    cdef lane_t one = 1
    cdef lane_t low, half, disc, kept
    if shift == 0:
        return x
    low = (one << shift) - 1
    if mode == 0:
        return x & ~low
    if mode == 2:
        return (x + (one << (shift - 1))) & ~low
    if (x & exp_mask) == exp_mask:
        return x & ~low
    disc = x & low
    kept = x >> shift
    if mode == 3:
        if disc != 0:
            kept |= 1
    else:
        half = one << (shift - 1)
        if disc > half or (disc == half and (kept & 1)):
            kept += 1
    return kept << shift


cdef int _prepare(const int16_t[:, ::1] perm, const uint8_t[:, ::1] bsel, int V,
                  int16_t **perm_out, uint64_t **mask_out) except -1:
    """Copy masks into flat buffers: zero entries point at slot V, selectors become 0x00/0xFF bytes."""
    cdef Py_ssize_t n_in = perm.shape[0], nsteps = bsel.shape[0], k, p
    cdef int16_t *pm = <int16_t *> malloc(n_in * V * sizeof(int16_t))
    cdef uint64_t *mk = <uint64_t *> malloc(nsteps * V + 8)
    if pm == NULL or mk == NULL:
        free(pm); free(mk)
        raise MemoryError()
    for k in range(n_in):
        for p in range(V):
            pm[k * V + p] = perm[k, p] if perm[k, p] >= 0 else V
    for k in range(nsteps):
        for p in range(V):
            (<uint8_t *> mk)[k * V + p] = 0xFF if bsel[k, p] else 0
    perm_out[0] = pm
    mask_out[0] = mk
    return 0


cdef inline void _blend(uint8_t *dst, const uint8_t *src, const uint8_t *mask, int V) noexcept nogil:
    cdef uint64_t d, s, m
    cdef int w
    for w in range(0, V, 8):
        memcpy(&d, dst + w, 8)
        memcpy(&s, src + w, 8)
        memcpy(&m, mask + w, 8)
        d = (s & m) | (d & ~m)
        memcpy(dst + w, &d, 8)


def pack_groups(lane_t[::1] lanes, uint8_t[::1] out, const int16_t[:, ::1] perm,
                const int32_t[::1] bdst, const int32_t[::1] bsrc, const uint8_t[:, ::1] bsel,
                int n_in, int n_out, int V, int shift, int mode):
    cdef Py_ssize_t P = sizeof(lane_t)
    cdef Py_ssize_t L = V // P
    cdef Py_ssize_t G = lanes.shape[0] // (n_in * L)
    cdef Py_ssize_t nsteps = bdst.shape[0]
    cdef Py_ssize_t g, k, l, p, st
    cdef lane_t r, exp_mask
    cdef lane_t *src
    cdef int16_t *pm
    cdef uint64_t *mk
    if lane_t is uint32_t:
        exp_mask = 0x7F800000u
    else:
        exp_mask = 0x7FF0000000000000ull
    if G == 0:
        return
    if out.shape[0] < G * n_out * V:
        raise ValueError("output buffer too small")
    _prepare(perm, bsel, V, &pm, &mk)
    cdef uint8_t *reg = <uint8_t *> malloc(V + 1)
    cdef uint8_t *permuted = <uint8_t *> malloc(n_in * V)
    cdef uint8_t *packed = <uint8_t *> malloc(n_out * V)
    if reg == NULL or permuted == NULL or packed == NULL:
        free(reg); free(permuted); free(packed); free(pm); free(mk)
        raise MemoryError()
    reg[V] = 0
    with nogil:
        for g in range(G):
            src = &lanes[g * n_in * L]
            for k in range(n_in):
                for l in range(L):
                    r = _round(src[k * L + l], shift, mode, exp_mask)
                    memcpy(&reg[l * P], &r, P)
                for p in range(V):
                    permuted[k * V + p] = reg[pm[k * V + p]]
            memset(packed, 0, n_out * V)
            for st in range(nsteps):
                _blend(packed + bdst[st] * V, permuted + bsrc[st] * V, <uint8_t *> mk + st * V, V)
            memcpy(&out[g * n_out * V], packed, n_out * V)
    free(reg); free(permuted); free(packed); free(pm); free(mk)


def unpack_groups(const uint8_t[::1] src, lane_t[::1] lanes, const int16_t[:, ::1] perm,
                  const int32_t[::1] bdst, const int32_t[::1] bsrc, const uint8_t[:, ::1] bsel,
                  int n_in, int n_out, int V):
    cdef Py_ssize_t P = sizeof(lane_t)
    cdef Py_ssize_t L = V // P
    cdef Py_ssize_t G = src.shape[0] // (n_out * V)
    cdef Py_ssize_t nsteps = bdst.shape[0]
    cdef Py_ssize_t g, k, p, st
    cdef const uint8_t *block
    cdef uint8_t *c
    cdef int16_t *pm
    cdef uint64_t *mk
    if G == 0:
        return
    if lanes.shape[0] < G * n_in * L:
        raise ValueError("lane buffer too small")
    _prepare(perm, bsel, V, &pm, &mk)
    # one spare zero byte after every combined register for the zero-fill slot
    cdef uint8_t *combined = <uint8_t *> malloc(n_in * (V + 1))
    cdef uint8_t *reg = <uint8_t *> malloc(V)
    if combined == NULL or reg == NULL:
        free(combined); free(reg); free(pm); free(mk)
        raise MemoryError()
    with nogil:
        for g in range(G):
            block = &src[g * n_out * V]
            memset(combined, 0, n_in * (V + 1))
            for st in range(nsteps):
                _blend(combined + bdst[st] * (V + 1), block + bsrc[st] * V, <uint8_t *> mk + st * V, V)
            for k in range(n_in):
                c = combined + k * (V + 1)
                for p in range(V):
                    reg[p] = c[pm[k * V + p]]
                memcpy(&lanes[(g * n_in + k) * L], reg, V)
    free(combined); free(reg); free(pm); free(mk)


cdef inline float _narrow_f32(float x, int shift, int mode) noexcept nogil:
    cdef uint32_t b
    memcpy(&b, &x, 4)
    b = _round[uint32_t](b, shift, mode, 0x7F800000u)
    memcpy(&x, &b, 4)
    return x


cdef inline double _narrow_f64(double x, int shift, int mode) noexcept nogil:
    cdef uint64_t b
    memcpy(&b, &x, 8)
    b = _round[uint64_t](b, shift, mode, 0x7FF0000000000000ull)
    memcpy(&x, &b, 8)
    return x


def accumulate(real_t[::1] terms, int shift, int mode, bint round_each):
    cdef real_t s = 0
    cdef Py_ssize_t i, n = terms.shape[0]
    with nogil:
        if round_each and shift:
            for i in range(n):
                s = s + terms[i]
                if real_t is float:
                    s = _narrow_f32(s, shift, mode)
                else:
                    s = _narrow_f64(s, shift, mode)
        else:
            for i in range(n):
                s = s + terms[i]
    return s


def row_dots(const real_t[:, ::1] A, const real_t[::1] x, real_t[::1] y, int unroll, int vf):
    cdef Py_ssize_t rows = A.shape[0], cols = A.shape[1]
    cdef Py_ssize_t step = unroll * vf
    cdef Py_ssize_t i, j, t
    cdef real_t acc
    with nogil:
        for i in range(rows):
            acc = 0
            j = 0
            while j + step <= cols:
                for t in range(step):
                    acc = acc + A[i, j + t] * x[j + t]
                j += step
            while j < cols:
                acc = acc + A[i, j] * x[j]
                j += 1
            y[i] = acc


def matmul(const real_t[:, ::1] A, const real_t[:, ::1] B, real_t[:, ::1] C, int unroll, int vf):
    cdef Py_ssize_t n = A.shape[0], K = A.shape[1], m = B.shape[1]
    cdef Py_ssize_t step = unroll * vf
    cdef Py_ssize_t i, j, k, t
    cdef real_t acc
    with nogil:
        for i in range(n):
            for j in range(m):
                acc = 0
                k = 0
                while k + step <= K:
                    for t in range(step):
                        acc = acc + A[i, k + t] * B[k + t, j]
                    k += step
                while k < K:
                    acc = acc + A[i, k] * B[k, j]
                    k += 1
                C[i, j] = acc
