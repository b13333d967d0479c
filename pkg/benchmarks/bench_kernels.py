#!/usr/bin/env python3
"""Benchmark the numba-jitted kernels against their pure-numpy fallbacks.

Runs each hot kernel on representative workloads with both backends and
prints a timing table. The numba path is skipped automatically when numba is
unavailable or K_FINDER_PURE_NUMPY=1 disabled it at import time.
"""

import time

import numpy as np

from kfinder import _kernels


def bench(fn, args, repeat=5, warmup=1):
    for _ in range(warmup):
        fn(*args)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def workloads(rng):
    G = rng.normal(size=(64, 64))
    G = G @ G.T
    v0 = _kernels.start_vector(64)

    X600 = np.ascontiguousarray(rng.normal(size=(600, 4)))

    z = rng.normal(size=400)

    C = np.ascontiguousarray(rng.normal(size=(300, 10)))
    y0 = np.full(300, 0.3)
    vC = _kernels.start_vector(10)

    Xl = np.ascontiguousarray(rng.normal(size=(5000, 32)))
    centers = np.ascontiguousarray(rng.normal(size=(6, 32)))
    labels = rng.integers(0, 6, size=5000).astype(np.int64)

    pts = np.ascontiguousarray(rng.normal(size=(16, 4)))

    gram_pts = np.ascontiguousarray(rng.normal(size=(400, 400)))
    gram = np.ascontiguousarray(gram_pts @ gram_pts.T)
    idx = np.sort(rng.choice(400, size=128, replace=False)).astype(np.int64)

    return [
        ("top_eig_vec (64x64)", "top_eig_vec", (G, v0, 1e-13, 1000)),
        ("pairwise_sqdist (600x4)", "pairwise_sqdist", (X600,)),
        ("capped_simplex (n=400)", "capped_simplex", (z, 120, 100)),
        (
            "selection_solve (300x10, 600 iters)",
            "selection_solve",
            (C, y0, vC, 90, 600, 60, 1e-4, 0.5 * np.sqrt(90), 100),
        ),
        ("lloyd_assign (5000x32, k=6)", "lloyd_assign", (Xl, centers)),
        ("lloyd_update (5000x32, k=6)", "lloyd_update", (Xl, labels, 6)),
        (
            "gray_weak_scan (16 pts, 65k subsets)",
            "gray_weak_scan",
            (pts, 2, 1e-9, 1e-13, 600),
        ),
        (
            "gram_tight_test (|T|=128 of 400)",
            "gram_tight_test",
            (gram, idx, 1e12, 1e-13, 600),
        ),
    ]


def main():
    rng = np.random.default_rng(0)
    rows = []
    for label, name, args in workloads(rng):
        t_np = bench(_kernels.NUMPY_IMPLS[name], args)
        if _kernels.NUMBA_IMPLS is not None:
            t_nb = bench(_kernels.NUMBA_IMPLS[name], args)
            speedup = f"{t_np / t_nb:6.1f}x"
            nb_ms = f"{t_nb * 1e3:10.3f}"
        else:
            speedup, nb_ms = "   n/a", "       n/a"
        rows.append((label, t_np * 1e3, nb_ms, speedup))

    print(f"numba enabled: {_kernels.NUMBA_ENABLED}")
    print(f"{'kernel':40s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s}")
    for label, np_ms, nb_ms, speedup in rows:
        print(f"{label:40s} {np_ms:10.3f} {nb_ms:>10s} {speedup:>8s}")


if __name__ == "__main__":
    main()
