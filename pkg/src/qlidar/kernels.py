"""Selects the lag-scan correlation kernel at import time.

The compiled extension is preferred; set ``QLIDAR_PURE_PYTHON=1`` to force
the numpy implementation.
"""
import os

from . import _xcorr_py

python_lagged_xcorr = _xcorr_py.lagged_xcorr

try:
    from ._xcorr import lagged_xcorr as compiled_lagged_xcorr
except ImportError:  # extension not built
    compiled_lagged_xcorr = None

if compiled_lagged_xcorr is not None and not os.environ.get("QLIDAR_PURE_PYTHON"):
    lagged_xcorr = compiled_lagged_xcorr
    BACKEND = "cython"
else:
    lagged_xcorr = python_lagged_xcorr
    BACKEND = "python"

__all__ = ["lagged_xcorr", "BACKEND", "compiled_lagged_xcorr", "python_lagged_xcorr"]
