"""Pure-numpy lag-scan cross-correlation, used when the extension is absent."""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

# bound on the materialized (lags x length) block, in elements
_BLOCK = 1 << 22


def lagged_xcorr(x, p, bits, r, length, nlags):
    """Same contract as the compiled kernel."""
    length, nlags = int(length), int(nlags)
    if length < 1 or nlags < 1:
        raise ValueError("length and nlags must be positive")
    x = np.ascontiguousarray(x[:length], dtype=np.float64)
    p = np.ascontiguousarray(p[:length], dtype=np.float64)
    if x.shape[0] < length or p.shape[0] < length:
        raise ValueError("frame shorter than correlation length")
    need = length + nlags - 1
    if len(r) < need or len(bits) < need:
        raise ValueError("receive window too short for requested lags")

    b = np.asarray(bits[:need]).astype(bool)
    r = np.asarray(r[:need], dtype=np.float64)
    r1 = np.where(b, r, 0.0)
    r0 = r - r1
    w0 = sliding_window_view(r0, length)
    w1 = sliding_window_view(r1, length)

    c1 = np.empty(nlags)
    c2 = np.empty(nlags)
    step = max(1, _BLOCK // length)
    for lo in range(0, nlags, step):
        hi = min(nlags, lo + step)
        a0 = np.ascontiguousarray(w0[lo:hi])
        a1 = np.ascontiguousarray(w1[lo:hi])
        c1[lo:hi] = a0 @ x + a1 @ p
        c2[lo:hi] = a1 @ x - a0 @ p
    c1 /= length
    c2 /= length
    return c1, c2
