#!/usr/bin/env python3
"""Benchmark the top-k scan kernels: compiled extension vs numpy fallback.

Runs the exact query path both backends share (unit-norm matrix, top-k with
tie-breaks) at several corpus sizes and prints a throughput table. Results
are checked for equality first, so the numbers always compare identical
answers.

Usage: python benchmarks/bench_topk.py [--sizes 10000 100000] [--dim 256]
       [--k 5] [--queries 50]
"""

import argparse
import time

import numpy as np

from eventnav._kernels import _scan_py

try:
    from eventnav._kernels import _scan
except ImportError:
    _scan = None


def make_corpus(n, dim, seed):
    rng = np.random.default_rng(seed)
    matrix = rng.normal(size=(n, dim))
    matrix /= np.linalg.norm(matrix, axis=1, keepdims=True)
    queries = rng.normal(size=(64, dim))
    queries /= np.linalg.norm(queries, axis=1, keepdims=True)
    return np.ascontiguousarray(matrix), np.ascontiguousarray(queries)


def bench(kernel, matrix, queries, k, repeats):
    start = time.perf_counter()
    for i in range(repeats):
        kernel(matrix, queries[i % len(queries)], k)
    elapsed = time.perf_counter() - start
    return repeats / elapsed


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", type=int, nargs="+", default=[10_000, 50_000, 150_000])
    parser.add_argument("--dim", type=int, default=256)
    parser.add_argument("--k", type=int, default=5)
    parser.add_argument("--queries", type=int, default=50)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    backends = [("python", _scan_py.topk_scan)]
    if _scan is not None:
        backends.append(("cython", _scan.topk_scan))
    else:
        print("note: compiled kernel not built; benchmarking the fallback only")

    print(f"dim={args.dim} k={args.k} queries/size={args.queries}")
    print(f"{'rows':>9}  " + "  ".join(f"{name + ' q/s':>14}" for name, _ in backends)
          + ("  speedup" if len(backends) == 2 else ""))
    for n in args.sizes:
        matrix, queries = make_corpus(n, args.dim, args.seed)
        # agreement check before timing
        wants = None
        for _, kernel in backends:
            idx, scores = kernel(matrix, queries[0], args.k)
            if wants is None:
                wants = list(idx)
            elif list(idx) != wants:
                raise SystemExit(f"kernels disagree at n={n}: {list(idx)} vs {wants}")
        rates = [bench(kernel, matrix, queries, args.k, args.queries)
                 for _, kernel in backends]
        row = f"{n:>9}  " + "  ".join(f"{rate:>14.1f}" for rate in rates)
        if len(rates) == 2:
            row += f"  {rates[1] / rates[0]:>6.2f}x"
        print(row)


if __name__ == "__main__":
    main()
