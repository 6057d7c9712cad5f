"""Pure-Python (numpy) versions of the compiled kernels in ``_kernels.pyx``."""

import numpy as np
from scipy.special import erfc

# Gaussian terms beyond this many bandwidths are 0 or 1 to double precision.
CUT = 8.5


def bucket_mean(timestamps, values, present, interval):
    """Mean of present values per [k*interval, (k+1)*interval) bucket.

    Timestamps must be sorted ascending. Buckets with no present sample are
    omitted. Returns (bucket_starts, means).
    """
    mask = np.asarray(present, dtype=bool)
    ts = np.asarray(timestamps, dtype=np.float64)[mask]
    vals = np.asarray(values, dtype=np.float64)[mask]
    if len(ts) == 0:
        return np.empty(0), np.empty(0)
    keys = np.floor(ts / interval)
    first = np.flatnonzero(np.r_[True, keys[1:] != keys[:-1]])
    counts = np.diff(np.r_[first, len(keys)])
    # left-to-right accumulation inside each bucket, vectorized across
    # buckets, so results are bit-identical to the compiled path
    sums = vals[first].copy()
    for j in range(1, int(counts.max())):
        live = counts > j
        sums[live] += vals[first[live] + j]
    return keys[first] * interval, sums / counts


def gauss_cdf_mean(xs, edges, h):
    """F(e) = mean_j Phi((e - x_j) / h) for each edge.

    ``xs`` and ``edges`` must be sorted ascending.
    """
    xs = np.asarray(xs, dtype=np.float64)
    edges = np.asarray(edges, dtype=np.float64)
    n = len(xs)
    lo = np.searchsorted(xs, edges - CUT * h, side="left")
    hi = np.searchsorted(xs, edges + CUT * h, side="right")
    scale = 1.0 / (h * np.sqrt(2.0))
    out = np.empty(len(edges))
    for k, e in enumerate(edges):
        window = xs[lo[k]:hi[k]]
        out[k] = (lo[k] + np.sum(0.5 * erfc((window - e) * scale))) / n
    return out
