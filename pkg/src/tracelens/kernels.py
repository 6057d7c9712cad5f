"""Selects the compiled kernels when built, else the numpy fallback.

Set ``TRACELENS_BACKEND=python`` to force the fallback.
"""

import os

if os.environ.get("TRACELENS_BACKEND", "").lower() == "python":
    from . import _kernels_py as _impl

    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:
        from . import _kernels_py as _impl

        BACKEND = "python"

bucket_mean = _impl.bucket_mean
gauss_cdf_mean = _impl.gauss_cdf_mean

__all__ = ["BACKEND", "bucket_mean", "gauss_cdf_mean"]
