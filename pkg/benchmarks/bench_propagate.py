"""Benchmark the two trajectory-propagation backends.

Propagates the same randomly sampled batch with the compiled kernel and
with the pure-NumPy fallback and reports wall times plus the maximum
deviation between the two results.

Usage: python benchmarks/bench_propagate.py [--n 2000] [--repeat 3]
"""

import argparse
import time

import numpy as np

from pairspace.fields import FieldParams
from pairspace.trajectory import (HAVE_COMPILED_KERNEL, ForceToggles,
                                  _propagate_batch_numpy, propagate_batch)


def make_batch(n, seed=0):
    rng = np.random.default_rng(seed)
    y = np.column_stack([rng.uniform(-8, 8, n), np.zeros(n),
                         rng.uniform(-1.2, 1.2, n)])
    t0 = rng.uniform(-25, 0, n)
    qsign = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    spin = np.full(n, -0.5)
    return y, t0, qsign, spin


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2000, help="batch size")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--t-end", type=float, default=60.0)
    args = ap.parse_args()

    params = FieldParams(epsilon=0.5, tau=10.0, lam=10.0, omega=0.1, phi=0.0)
    toggles = ForceToggles()
    results = {}
    backends = [("numpy", lambda y, t0, q, s: _propagate_batch_numpy(
        y, t0, args.t_end, q, s, toggles, params, 1e-10, 1e-12, 1e-12))]
    if HAVE_COMPILED_KERNEL:
        backends.insert(0, ("compiled", lambda y, t0, q, s: propagate_batch(
            y, t0, args.t_end, q, s, toggles, params)[1]))
    else:
        print("compiled kernel not available; timing the fallback only")

    for name, run in backends:
        best = np.inf
        for _ in range(args.repeat):
            y, t0, qsign, spin = make_batch(args.n)
            y = np.ascontiguousarray(y)
            start = time.perf_counter()
            status = run(y, t0.copy(), qsign, spin)
            best = min(best, time.perf_counter() - start)
            assert not np.any(status)
        results[name] = (best, y)
        rate = args.n / best
        print(f"{name:9s} best of {args.repeat}: {best:8.3f} s "
              f"({rate:9.0f} trajectories/s)")

    if len(results) == 2:
        dev = np.max(np.abs(results["compiled"][1] - results["numpy"][1]))
        speedup = results["numpy"][0] / results["compiled"][0]
        print(f"speedup:   {speedup:.1f}x   max |difference|: {dev:.3g}")


if __name__ == "__main__":
    main()
