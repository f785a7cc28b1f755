"""Time the lag-scan correlation backends.

Compares the compiled direct kernel, the numpy fallback and the FFT path
over a few (L, lags) shapes and reports the agreement between them.

    python3 benchmarks/bench_xcorr.py [--repeat N]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from qlidar import kernels
from qlidar.ranging import _fft_xcorr

SHAPES = [(256, 512), (1024, 1024), (2048, 2048), (2048, 8192), (4096, 16384), (16384, 32768)]


def _time(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(1)
    print(f"compiled kernel available: {kernels.compiled_lagged_xcorr is not None}")
    print(f"{'L':>6} {'lags':>6} {'work':>10} {'cython ms':>10} {'python ms':>10} {'fft ms':>8} {'max rel err':>12}")
    for length, nlags in SHAPES:
        n = length + nlags - 1
        x, p, r = rng.normal(size=length), rng.normal(size=length), rng.normal(size=n)
        bits = rng.integers(0, 2, n, dtype=np.uint8)
        args_ = (x, p, bits, r, length, nlags)
        t_py, ref = _time(lambda: kernels.python_lagged_xcorr(*args_), args.repeat)
        if kernels.compiled_lagged_xcorr is not None:
            t_cy, _ = _time(lambda: kernels.compiled_lagged_xcorr(*args_), args.repeat)
        else:
            t_cy = float("nan")
        t_fft, got = _time(lambda: _fft_xcorr(*args_), args.repeat)
        scale = max(np.abs(ref[0]).max(), np.abs(ref[1]).max())
        err = max(np.abs(got[0] - ref[0]).max(), np.abs(got[1] - ref[1]).max()) / scale
        print(
            f"{length:6d} {nlags:6d} {length * nlags:10d} {1e3 * t_cy:10.2f} "
            f"{1e3 * t_py:10.2f} {1e3 * t_fft:8.2f} {err:12.2e}"
        )


if __name__ == "__main__":
    main()
