import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tracelens import _kernels_py, kernels

compiled = pytest.importorskip("tracelens._kernels", reason="extension not built")


def test_default_backend_is_compiled():
    assert kernels.BACKEND == "cython"


def test_backend_override():
    env = dict(os.environ, TRACELENS_BACKEND="python")
    out = subprocess.run(
        [sys.executable, "-c", "from tracelens import kernels; print(kernels.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.tuples(st.integers(1, 100), st.floats(-1e9, 1e9), st.booleans()), max_size=300),
    st.sampled_from([1.0, 15.0, 60.0, 86400.0, 2.5]),
)
def test_bucket_mean_bit_identical(rows, interval):
    ts = np.cumsum([r[0] for r in rows]).astype(np.float64) - 50
    vals = np.array([r[1] for r in rows], dtype=np.float64)
    present = np.array([r[2] for r in rows], dtype=np.uint8)
    a = compiled.bucket_mean(ts, vals, present, interval)
    b = _kernels_py.bucket_mean(ts, vals, present, interval)
    assert np.array_equal(a[0], b[0])
    assert np.array_equal(a[1], b[1])


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.floats(-1e4, 1e4), min_size=1, max_size=200),
    st.floats(1e-3, 1e3),
)
def test_gauss_cdf_mean_agree(xs, h):
    x = np.sort(np.array(xs))
    edges = np.linspace(x[0] - 10 * h, x[-1] + 10 * h, 57)
    a = compiled.gauss_cdf_mean(x, edges, h)
    b = _kernels_py.gauss_cdf_mean(x, edges, h)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-14)
    assert np.all(np.diff(a) >= -1e-15)
    assert a[0] < 1e-15 and abs(a[-1] - 1) < 1e-15
