# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops. ``tgi3d._fallback`` mirrors every function here in NumPy."""

from libc.math cimport sqrt, log, cos, fabs, NAN
from libc.stdint cimport uint64_t
import numpy as np

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef double TWO_PI = 6.283185307179586
cdef double INV_2_53 = 1.0 / 9007199254740992.0


cdef inline uint64_t _mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline uint64_t _stream_key(uint64_t seed, uint64_t domain, uint64_t stream) noexcept nogil:
    return _mix64(_mix64(seed ^ domain) + GOLDEN * (stream + 1))


def fill_uniform(uint64_t seed, uint64_t domain, uint64_t stream0, double[:, ::1] out):
    """out[s, j] = uniform [0, 1) draw at counter j of stream ``stream0 + s``."""
    cdef Py_ssize_t n_streams = out.shape[0], n = out.shape[1], s, j
    cdef uint64_t key
    with nogil:
        for s in range(n_streams):
            key = _stream_key(seed, domain, stream0 + s)
            for j in range(n):
                out[s, j] = <double>(_mix64(key + GOLDEN * (j + 1)) >> 11) * INV_2_53


def add_gaussian(uint64_t seed, uint64_t domain, uint64_t stream0, double sigma,
                 double[:, ::1] out):
    """out[s, j] += sigma * z where z is a Box-Muller normal from counters 2j, 2j+1."""
    cdef Py_ssize_t n_streams = out.shape[0], n = out.shape[1], s, j
    cdef uint64_t key, c
    cdef double u1, u2
    with nogil:
        for s in range(n_streams):
            key = _stream_key(seed, domain, stream0 + s)
            for j in range(n):
                c = 2 * <uint64_t>j
                u1 = <double>((_mix64(key + GOLDEN * (c + 1)) >> 11) + 1) * INV_2_53
                u2 = <double>(_mix64(key + GOLDEN * (c + 2)) >> 11) * INV_2_53
                out[s, j] += sigma * (sqrt(-2.0 * log(u1)) * cos(TWO_PI * u2))


def prefix_sum(const double[:, ::1] samples, double scale, double[:, ::1] out):
    """Row-wise Neumaier-compensated running sums, multiplied by ``scale``."""
    cdef Py_ssize_t rows = samples.shape[0], cols = samples.shape[1], i, t
    cdef double s, c, x, tt
    with nogil:
        for i in range(rows):
            s = 0.0
            c = 0.0
            for t in range(cols):
                x = samples[i, t]
                tt = s + x
                if fabs(s) >= fabs(x):
                    c = c + ((s - tt) + x)
                else:
                    c = c + ((x - tt) + s)
                s = tt
                out[i, t] = (s + c) * scale


def masked_argmax(const double[:, ::1] values, const unsigned char[::1] valid):
    """First index of the row maximum over columns with ``valid`` set, NaN skipped.

    Rows with no usable column get index -1 and peak NaN.
    """
    cdef Py_ssize_t rows = values.shape[0], cols = values.shape[1], r, t, best
    cdef double v, peak
    idx = np.empty(rows, dtype=np.int64)
    peaks = np.empty(rows, dtype=np.float64)
    cdef long long[::1] idx_v = idx
    cdef double[::1] peak_v = peaks
    with nogil:
        for r in range(rows):
            best = -1
            peak = 0.0
            for t in range(cols):
                if not valid[t]:
                    continue
                v = values[r, t]
                if v != v:
                    continue
                if best < 0 or v > peak:
                    best = t
                    peak = v
            idx_v[r] = best
            peak_v[r] = peak if best >= 0 else NAN
    return idx, peaks
