# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled lag-scan cross-correlation."""
import numpy as np


def lagged_xcorr(const double[::1] x, const double[::1] p,
                 const unsigned char[::1] bits, const double[::1] r,
                 Py_ssize_t length, Py_ssize_t nlags):
    """Return (c1, c2) for lags 0..nlags-1 by direct summation.

    c1[d] = (1/L) sum_i T1_i(d) r[i+d], T1_i(d) = x_i or p_i by bits[i+d]
    c2[d] = (1/L) sum_i T2_i(d) r[i+d], T2_i(d) = -p_i or x_i by bits[i+d]
    """
    if length < 1 or nlags < 1:
        raise ValueError("length and nlags must be positive")
    if x.shape[0] < length or p.shape[0] < length:
        raise ValueError("frame shorter than correlation length")
    if r.shape[0] < length + nlags - 1 or bits.shape[0] < length + nlags - 1:
        raise ValueError("receive window too short for requested lags")

    c1 = np.empty(nlags, dtype=np.float64)
    c2 = np.empty(nlags, dtype=np.float64)
    cdef double[::1] c1v = c1
    cdef double[::1] c2v = c2
    cdef Py_ssize_t d, i
    cdef double s1, s2, rv, inv = 1.0 / length
    with nogil:
        for d in range(nlags):
            s1 = 0.0
            s2 = 0.0
            for i in range(length):
                rv = r[i + d]
                if bits[i + d]:
                    s1 = s1 + p[i] * rv
                    s2 = s2 + x[i] * rv
                else:
                    s1 = s1 + x[i] * rv
                    s2 = s2 - p[i] * rv
            c1v[d] = s1 * inv
            c2v[d] = s2 * inv
    return c1, c2
