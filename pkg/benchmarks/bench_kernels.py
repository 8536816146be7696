#!/usr/bin/env python3
"""Benchmark the fused update kernels: numba hot path vs the numpy twins.

    python3 benchmarks/bench_kernels.py [--size 1000000] [--repeats 30]

The numba path fuses each rule's moment updates, bias corrections, and the
weight write into one pass over the buffer; the numpy twin allocates a
temporary per subexpression. Reported speedups are per-call medians after a
warm-up call that absorbs JIT compilation.
"""
import argparse
import statistics
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from optlab import _kernels as K  # noqa: E402

CASES = {
    "sgd": lambda b: ([b["w"], b["g"]], [1e-3]),
    "heavy_ball": lambda b: ([b["w"], b["g"], b["prev"]], [1e-3, 0.9]),
    "nesterov": lambda b: ([b["w"], b["g"], b["buf"]], [1e-3, 0.9]),
    "adagrad": lambda b: ([b["w"], b["g"], b["acc"]], [1e-3, 1e-10]),
    "rmsprop": lambda b: ([b["w"], b["g"], b["v"]], [1e-3, 0.999, 1e-8]),
    "adam": lambda b: ([b["w"], b["g"], b["m"], b["v"]],
                       [1e-3, 0.9, 0.999, 1e-8, 0.1, 0.002, 0.9999, 0.0]),
    "sign_momentum": lambda b: ([b["w"], b["g"], b["m"]], [1e-3, 0.9, 0.1]),
    "sophia": lambda b: ([b["w"], b["m"], b["acc"]], [1e-3, 1e-12, 1.0]),
    "ema": lambda b: ([b["m"], b["w"]], [0.99]),
}


def fresh_buffers(size, seed=0):
    rng = np.random.default_rng(seed)
    return {
        "w": rng.normal(size=size),
        "g": rng.normal(size=size),
        "m": rng.normal(size=size),
        "v": np.abs(rng.normal(size=size)),
        "acc": np.abs(rng.normal(size=size)),
        "prev": rng.normal(size=size),
        "buf": rng.normal(size=size),
    }


def time_call(fn, arrays, scalars, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*arrays, *scalars)
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--size", type=int, default=1_000_000)
    parser.add_argument("--repeats", type=int, default=30)
    args = parser.parse_args()

    numpy_impls = K.implementations("numpy")
    numba_impls = K.implementations("numba")

    print(f"kernel backends on {args.size:,} float64 elements "
          f"(median of {args.repeats} calls)\n")
    print(f"{'kernel':<14} {'numpy ms':>10} {'numba ms':>10} {'speedup':>9}")
    for name, build in CASES.items():
        rows = {}
        for label, impls in (("numpy", numpy_impls), ("numba", numba_impls)):
            bufs = fresh_buffers(args.size)
            arrays, scalars = build(bufs)
            impls[name](*arrays, *scalars)  # warm-up / JIT
            bufs = fresh_buffers(args.size)
            arrays, scalars = build(bufs)
            rows[label] = time_call(impls[name], arrays, scalars, args.repeats)
        speedup = rows["numpy"] / rows["numba"]
        print(f"{name:<14} {rows['numpy'] * 1e3:>10.3f} "
              f"{rows['numba'] * 1e3:>10.3f} {speedup:>8.2f}x")
    print(f"\nactive backend for library calls: {K.BACKEND} "
          "(override with OPTLAB_BACKEND=numpy|numba)")


if __name__ == "__main__":
    main()
