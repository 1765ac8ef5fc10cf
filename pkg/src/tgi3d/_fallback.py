"""Pure NumPy versions of the compiled kernels in ``_kernels.pyx``.

Uniform streams and prefix sums are bit-identical to the compiled versions.
Gaussian draws can differ in the last bit because NumPy and libm implement
``log``/``cos`` differently.
"""

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_INV_2_53 = 1.0 / 9007199254740992.0


def _mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def _stream_keys(seed, domain, stream0, n_streams):
    base = _mix64(np.array([seed ^ domain], dtype=np.uint64))
    streams = np.arange(n_streams, dtype=np.uint64) + np.uint64(stream0) + np.uint64(1)
    return _mix64(base + _GOLDEN * streams)


def _words(keys, counters):
    return _mix64(keys[:, None] + _GOLDEN * counters[None, :])


def fill_uniform(seed, domain, stream0, out):
    keys = _stream_keys(seed, domain, stream0, out.shape[0])
    counters = np.arange(1, out.shape[1] + 1, dtype=np.uint64)
    out[...] = (_words(keys, counters) >> np.uint64(11)).astype(np.float64) * _INV_2_53


def add_gaussian(seed, domain, stream0, sigma, out):
    keys = _stream_keys(seed, domain, stream0, out.shape[0])
    c = 2 * np.arange(out.shape[1], dtype=np.uint64)
    u1 = ((_words(keys, c + np.uint64(1)) >> np.uint64(11)) + np.uint64(1)).astype(np.float64) * _INV_2_53
    u2 = (_words(keys, c + np.uint64(2)) >> np.uint64(11)).astype(np.float64) * _INV_2_53
    out += sigma * (np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2))


def prefix_sum(samples, scale, out):
    s = np.zeros(samples.shape[0])
    c = np.zeros(samples.shape[0])
    for t in range(samples.shape[1]):
        x = samples[:, t]
        tt = s + x
        c += np.where(np.abs(s) >= np.abs(x), (s - tt) + x, (x - tt) + s)
        s = tt
        out[:, t] = (s + c) * scale


def masked_argmax(values, valid):
    rows = values.shape[0]
    masked = np.where(valid.astype(bool)[None, :] & ~np.isnan(values), values, -np.inf)
    if masked.shape[1] == 0:
        return np.full(rows, -1, dtype=np.int64), np.full(rows, np.nan)
    idx = np.argmax(masked, axis=1).astype(np.int64)
    peaks = masked[np.arange(rows), idx]
    empty = np.isneginf(peaks)
    idx[empty] = -1
    peaks[empty] = np.nan
    return idx, peaks
