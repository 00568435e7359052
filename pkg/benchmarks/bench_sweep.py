"""Time the compiled and numpy recurrence sweeps on the same workload.

Usage::

    python benchmarks/bench_sweep.py [--K 2000] [--repeat 5]

Both backends fill the four solution families of a few seeded operators
through index K; results are checked for equality before timings are
printed.
"""
import argparse
import time

import numpy as np

from bandspec import _backend
from bandspec.recurrence import extend
from bandspec.testkit import OperatorSeed, random_operator

CASES = [(1, 1, 1), (2, 2, 1), (3, 2, 2)]


def run(op, lam, K, name):
    sweep = _backend.get(name)
    t0 = time.perf_counter()
    basis = extend(op, lam, K, sweep=sweep)
    return time.perf_counter() - t0, basis


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--K", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    names = _backend.available()
    print(f"backends: {', '.join(names)}   K={args.K}   best of {args.repeat}")
    print(f"{'N r s':>8} " + " ".join(f"{n:>10}" for n in names) + "   speedup")
    for i, (N, r, s) in enumerate(CASES):
        op = random_operator(OperatorSeed(i, N, r, s))
        lam = 3.0 * op.bound
        op.forward_table(args.K)  # build coefficient tables outside the timing
        op.dual_table(args.K)
        best, results = {}, {}
        for name in names:
            times = []
            for _ in range(args.repeat):
                t, basis = run(op, lam, args.K, name)
                times.append(t)
            best[name] = min(times)
            results[name] = basis
        if len(names) == 2:
            a, b = results["python"], results["cython"]
            for fam in ("Q", "P", "Qplus", "Pplus"):
                fa, fb = a.family(fam), b.family(fam)
                assert np.array_equal(fa.exp, fb.exp)
                assert np.allclose(fa.mant, fb.mant, rtol=1e-12, atol=1e-14)
        row = " ".join(f"{best[n] * 1e3:>8.2f}ms" for n in names)
        ratio = best["python"] / best["cython"] if "cython" in best else float("nan")
        print(f"{N:>4}{r:>2}{s:>2} {row}   {ratio:6.1f}x")


if __name__ == "__main__":
    main()
