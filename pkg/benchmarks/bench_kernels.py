"""Benchmark the compiled kernels against the numpy reference backend.

Times the three hot kernels the way the simulator actually calls them:
one network evaluation per agent per timestep, one clearing search per
batch, one neighbor query per marginalization step. Run from the repo
root after an editable install:

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --forward 50000 --clearing 2000
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from evotrade import _kernels_py

try:
    from evotrade import _kernels
except ImportError:
    _kernels = None


def time_per_call(fn, n):
    t0 = time.perf_counter()
    for _ in range(n):
        fn()
    return (time.perf_counter() - t0) / n


def bench_forward(impl, n, rng):
    params = rng.normal(0.0, 0.5, impl.N_PARAMS)
    xs = rng.normal(0.0, 1.0, (64, impl.N_IN))
    i = 0

    def call():
        nonlocal i
        impl.nn_forward(params, xs[i & 63])
        i += 1

    return time_per_call(call, n)


def make_batch(rng, n_orders):
    mid = 100.0
    bid_p = np.sort(mid + rng.normal(0.0, 0.3, n_orders).round(2))[::-1].copy()
    ask_p = np.sort(mid + rng.normal(0.05, 0.3, n_orders).round(2))
    bid_p[rng.random(n_orders) < 0.1] = np.inf
    ask_p[rng.random(n_orders) < 0.1] = -np.inf
    bid_p = np.sort(bid_p)[::-1].copy()
    ask_p = np.sort(ask_p)
    bid_s = rng.integers(1, 300, n_orders).astype(np.int64)
    ask_s = rng.integers(1, 300, n_orders).astype(np.int64)
    return bid_p, bid_s, ask_p, ask_s


def bench_clearing(impl, n, rng, n_orders=200):
    batches = [make_batch(rng, n_orders) for _ in range(32)]
    i = 0

    def call():
        nonlocal i
        bp, bs, ap, as_ = batches[i & 31]
        impl.find_clearing(bp, bs, ap, as_, 100.0, 0.01)
        i += 1

    return time_per_call(call, n)


def bench_knn(impl, n, rng, corpus=100_000, k=10):
    vals = np.sort(rng.normal(0.0, 0.05, corpus))
    idx = rng.permutation(corpus).astype(np.int64)
    queries = rng.normal(0.0, 0.05, 256)
    i = 0

    def call():
        nonlocal i
        impl.knn_select(vals, idx, float(queries[i & 255]), k)
        i += 1

    return time_per_call(call, n)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--forward", type=int, default=20_000, help="nn_forward calls")
    ap.add_argument("--clearing", type=int, default=3_000, help="find_clearing calls")
    ap.add_argument("--knn", type=int, default=10_000, help="knn_select calls")
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    if _kernels is None:
        print("compiled backend not built; showing the python reference only")
    backends = [("python", _kernels_py)] + ([("compiled", _kernels)] if _kernels else [])

    rows = []
    for name, runs in (
        ("nn_forward", args.forward),
        ("find_clearing", args.clearing),
        ("knn_select", args.knn),
    ):
        per = {}
        for bname, impl in backends:
            rng = np.random.default_rng(args.seed)
            if name == "nn_forward":
                per[bname] = bench_forward(impl, runs, rng)
            elif name == "find_clearing":
                per[bname] = bench_clearing(impl, runs, rng)
            else:
                per[bname] = bench_knn(impl, runs, rng)
        rows.append((name, runs, per))

    print(f"{'kernel':<16} {'calls':>8} {'python':>12} {'compiled':>12} {'speedup':>9}")
    for name, runs, per in rows:
        py = per["python"] * 1e6
        if "compiled" in per:
            cy = per["compiled"] * 1e6
            print(f"{name:<16} {runs:>8} {py:>10.1f}us {cy:>10.1f}us {py / cy:>8.1f}x")
        else:
            print(f"{name:<16} {runs:>8} {py:>10.1f}us {'-':>12} {'-':>9}")

    if _kernels is not None:
        rng = np.random.default_rng(args.seed + 1)
        params = rng.normal(0.0, 0.5, _kernels_py.N_PARAMS)
        x = rng.normal(0.0, 1.0, _kernels_py.N_IN)
        d = np.abs(_kernels.nn_forward(params, x) - _kernels_py.nn_forward(params, x)).max()
        bp, bs, ap_, as_ = make_batch(rng, 120)
        c0 = _kernels.find_clearing(bp, bs, ap_, as_, 100.0, 0.01)
        c1 = _kernels_py.find_clearing(bp, bs, ap_, as_, 100.0, 0.01)
        vals = np.sort(rng.normal(0.0, 0.05, 5000))
        idx = rng.permutation(5000).astype(np.int64)
        k0 = _kernels.knn_select(vals, idx, 0.01, 25)
        k1 = _kernels_py.knn_select(vals, idx, 0.01, 25)
        print(
            f"parity: forward max|diff|={d:.2e}, clearing equal={c0 == c1}, "
            f"knn equal={bool(np.array_equal(k0, k1))}"
        )


if __name__ == "__main__":
    main()
