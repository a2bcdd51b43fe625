#!/usr/bin/env python3
"""Time the compiled scoring kernel against the pure-numpy fallback.

The kernel tallies family count tables and turns them into log-likelihood
terms; it sits in the inner loop of structure search and window scoring.

Run: python benchmarks/bench_scorekit.py [--samples 1000] [--repeats 200]
"""

import argparse
import time

import numpy as np

from tgxplain import _scorekit_py

try:
    from tgxplain import _scorekit

    BACKENDS = [("compiled", _scorekit), ("python", _scorekit_py)]
except ImportError:
    print("compiled extension not built; timing the python backend only")
    BACKENDS = [("python", _scorekit_py)]


def bench(impl, codes, families, repeats):
    start = time.perf_counter()
    sink = 0.0
    for _ in range(repeats):
        for child, parents in families:
            sink += impl.loglik_from_counts(impl.family_counts(codes, child, parents, 3))
    return time.perf_counter() - start, sink


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--samples", type=int, default=1000)
    parser.add_argument("--variables", type=int, default=8)
    parser.add_argument("--repeats", type=int, default=200)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    codes = rng.integers(0, 3, size=(args.samples, args.variables)).astype(np.uint8)
    families = [
        (0, []),
        (1, [0]),
        (2, [0, 1]),
        (3, [0, 1, 2]),
        (4, [5]),
        (5, [6, 7]),
    ]
    calls = args.repeats * len(families)

    print(f"{args.samples} samples x {args.variables} variables, {calls} family scores")
    results = {}
    checks = {}
    for name, impl in BACKENDS:
        elapsed, sink = bench(impl, codes, families, args.repeats)
        results[name] = elapsed
        checks[name] = sink
        print(f"  {name:9s} {elapsed:8.4f} s   {1e6 * elapsed / calls:8.2f} us/score")
    if len(results) == 2:
        if checks["compiled"] != checks["python"]:
            raise SystemExit("backends disagree; benchmark results are meaningless")
        print(f"  speedup   {results['python'] / results['compiled']:8.2f}x")


if __name__ == "__main__":
    main()
