"""Compare the compiled walk kernel against the pure-Python fallback.

Runs identical ensembles through both backends, checks the outputs are
bit-identical, and reports wall-clock throughput.

    python3 benchmarks/benchmark_kernel.py [--samples N]
"""
import argparse
import time

import numpy as np

from stirlab.kernel import BACKEND, run_batch

CASES = [
    # (d, beta, horizon periods)
    (2, 1.0, 4),
    (5, 8.0, 2),
    (5, 64.0, 1),
]


def bench(backend: str, d, beta, hk, samples):
    t0 = time.perf_counter()
    out = run_batch(d, beta, 1234, samples, hk, stop_at_closure=False,
                    backend=backend)
    return time.perf_counter() - t0, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--samples", type=int, default=500)
    args = ap.parse_args()

    if BACKEND != "cython":
        print("compiled kernel unavailable; nothing to compare against")
        return

    print(f"{'case':>22} {'python':>10} {'cython':>10} {'speedup':>8}  identical")
    for d, beta, hk in CASES:
        tp, op = bench("python", d, beta, hk, args.samples)
        tc, oc = bench("cython", d, beta, hk, args.samples)
        same = all(np.array_equal(op[k], oc[k]) for k in op)
        label = f"d={d} beta={beta} K={hk}"
        print(f"{label:>22} {tp:>9.3f}s {tc:>9.3f}s {tp / tc:>7.1f}x  {same}")


if __name__ == "__main__":
    main()
