# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels. Must stay numerically interchangeable with _kernels_py."""

import numpy as np

from libc.math cimport erfc, floor, sqrt

# Gaussian terms beyond this many bandwidths are 0 or 1 to double precision.
DEF CUT = 8.5


def bucket_mean(const double[::1] timestamps, const double[::1] values,
                const unsigned char[::1] present, double interval):
    """Mean of present values per [k*interval, (k+1)*interval) bucket.

    Timestamps must be sorted ascending. Buckets with no present sample are
    omitted. Returns (bucket_starts, means).
    """
    cdef Py_ssize_t n = timestamps.shape[0]
    cdef Py_ssize_t i, m = 0
    cdef double key, cur = 0.0, acc = 0.0
    cdef long cnt = 0
    cdef bint open_ = False
    starts = np.empty(n, dtype=np.float64)
    means = np.empty(n, dtype=np.float64)
    cdef double[::1] s = starts
    cdef double[::1] mu = means
    for i in range(n):
        if not present[i]:
            continue
        key = floor(timestamps[i] / interval)
        if open_ and key != cur:
            s[m] = cur * interval
            mu[m] = acc / cnt
            m += 1
            acc = 0.0
            cnt = 0
        cur = key
        open_ = True
        acc += values[i]
        cnt += 1
    if open_:
        s[m] = cur * interval
        mu[m] = acc / cnt
        m += 1
    return starts[:m], means[:m]


def gauss_cdf_mean(const double[::1] xs, const double[::1] edges, double h):
    """F(e) = mean_j Phi((e - x_j) / h) for each edge.

    ``xs`` and ``edges`` must be sorted ascending.
    """
    cdef Py_ssize_t n = xs.shape[0]
    cdef Py_ssize_t ne = edges.shape[0]
    cdef Py_ssize_t k, j, lo = 0, hi = 0
    cdef double e, acc
    cdef double scale = 1.0 / (h * sqrt(2.0))
    out = np.empty(ne, dtype=np.float64)
    cdef double[::1] f = out
    for k in range(ne):
        e = edges[k]
        while lo < n and xs[lo] < e - CUT * h:
            lo += 1
        if hi < lo:
            hi = lo
        while hi < n and xs[hi] <= e + CUT * h:
            hi += 1
        acc = 0.0
        for j in range(lo, hi):
            acc += 0.5 * erfc((xs[j] - e) * scale)
        f[k] = (lo + acc) / n
    return out
