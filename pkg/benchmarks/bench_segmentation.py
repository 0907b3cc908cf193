"""Benchmark the compiled union-find kernel against the pure-Python twin.

The two kernels consume identical pre-sorted edge lists and must return
bit-identical component roots; this script times both on random images of
increasing size and reports the speedup.

Usage: python benchmarks/bench_segmentation.py [--sizes 64,128,256]
"""

import argparse
import time

import numpy as np
from scipy.ndimage import gaussian_filter

from sceneparse import _felz_py
from sceneparse import segmentation as sg

try:
    from sceneparse import _felz

    HAVE_COMPILED = True
except ImportError:
    _felz = None
    HAVE_COMPILED = False


def prepare_edges(size, rng):
    img = rng.random((size, size, 3))
    params = sg.SegmentationParams(sigma=0.8, k_scale=60, min_size=20)
    smoothed = np.empty_like(img)
    for c in range(3):
        smoothed[:, :, c] = gaussian_filter(img[:, :, c], params.sigma, mode="reflect")
    ea, eb, wt = sg._grid_edges(smoothed * 255.0)
    order = np.argsort(wt, kind="stable")
    return (
        size * size,
        np.ascontiguousarray(ea[order]),
        np.ascontiguousarray(eb[order]),
        np.ascontiguousarray(wt[order]),
        params.effective_k(size, size),
        params.min_size,
    )


def time_kernel(kernel, args, repeats):
    best = float("inf")
    result = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = kernel.segment_edges(*args)
        best = min(best, time.perf_counter() - t0)
    return best, result


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", default="64,128,256")
    ap.add_argument("--repeats", type=int, default=3)
    opts = ap.parse_args()
    sizes = [int(s) for s in opts.sizes.split(",")]

    rng = np.random.default_rng(0)
    print(f"selected backend at import: {sg.BACKEND}")
    print(f"{'size':>6} {'edges':>10} {'pure (s)':>10} {'compiled (s)':>13} {'speedup':>8}")
    for size in sizes:
        args = prepare_edges(size, rng)
        t_pure, r_pure = time_kernel(_felz_py, args, opts.repeats)
        if HAVE_COMPILED:
            t_fast, r_fast = time_kernel(_felz, args, opts.repeats)
            assert np.array_equal(r_pure, r_fast), "kernels disagree"
            print(f"{size:>6} {args[1].shape[0]:>10} {t_pure:>10.4f} {t_fast:>13.4f} {t_pure / t_fast:>7.1f}x")
        else:
            print(f"{size:>6} {args[1].shape[0]:>10} {t_pure:>10.4f} {'n/a':>13} {'n/a':>8}")


if __name__ == "__main__":
    main()
