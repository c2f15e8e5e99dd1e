#!/usr/bin/env python3
"""Timing comparison of the numba kernels against their numpy twins.

Run:  python benchmarks/bench_kernels.py [--n 2000000] [--repeats 5]

The numba path is what the package uses by default; GEOMLAB_NO_NUMBA=1
switches the library to the numpy twins measured here.
"""

import argparse
import time

import numpy as np

from geomlab import kernels


def time_call(fn, *args, repeats=5):
    fn(*args)  # warm up (includes JIT compilation for the numba twin)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--n", type=int, default=2_000_000)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()
    rng = np.random.default_rng(0)
    n = args.n

    a = rng.normal(size=(n, 2, 2))
    first = np.ascontiguousarray(np.einsum("nij,nkj->nik", a, a) + 0.5 * np.eye(2))
    second = rng.normal(size=(n, 2, 2))
    second = np.ascontiguousarray(0.5 * (second + second.transpose(0, 2, 1)))

    b = rng.normal(size=(n // 4, 3, 3))
    ginv = np.ascontiguousarray(np.einsum("nij,nkj->nik", b, b) + np.eye(3))
    dg = rng.normal(size=(n // 4, 3, 3))
    dg = np.ascontiguousarray(0.5 * (dg + dg.transpose(0, 2, 1)))

    angles = np.ascontiguousarray(
        np.mod(np.cumsum(rng.normal(scale=0.5, size=n)), np.pi))
    mats = rng.normal(size=(n, 2, 2))
    mats = np.ascontiguousarray(0.5 * (mats + mats.transpose(0, 2, 1)))

    cases = [
        ("shape_operator_batch", (first, second)),
        ("tensor_norm_sq_batch", (ginv, dg)),
        ("winding_total", (angles, np.pi)),
        ("sym_eig2_batch", (mats,)),
    ]
    print(f"backend in library: {kernels.BACKEND}   (n = {n})")
    print(f"{'kernel':<24}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>9}")
    for name, data in cases:
        np_impl, nb_impl = kernels.IMPLEMENTATIONS[name]
        t_np = time_call(np_impl, *data, repeats=args.repeats)
        t_nb = time_call(nb_impl, *data, repeats=args.repeats)
        print(f"{name:<24}{1e3 * t_np:>12.2f}{1e3 * t_nb:>12.2f}"
              f"{t_np / t_nb:>9.2f}x")


if __name__ == "__main__":
    main()
