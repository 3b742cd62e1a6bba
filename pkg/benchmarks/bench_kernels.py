"""Time the compiled kernels against the numpy fallback.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5] [--sites 4000] [--rows 16]

Prints one line per kernel with the best wall time of each backend and the
speed-up. Agreement between the backends is covered by tests/test_kernels.py.
"""
import argparse
import timeit

import numpy as np

from latticefronts import kernels


def _inputs(rows, sites, seed=0):
    rng = np.random.default_rng(seed)
    U = np.ascontiguousarray(rng.uniform(0, 1, (rows, sites)))
    V = np.ascontiguousarray(rng.uniform(0, 0.5, (rows, sites)))
    P = np.ascontiguousarray(np.column_stack([rng.uniform(0.5, 1.5, (7, 6)), np.full(7, 0.5)]))
    G = np.ascontiguousarray(rng.uniform(0, 1, (7, 4, rows)))
    return U, V, P, G


def _cases(mod, rows, sites):
    U, V, P, G = _inputs(rows, sites)
    dU, dV = np.empty_like(U), np.empty_like(V)
    KU, KV = np.zeros((7, rows, sites)), np.zeros((7, rows, sites))
    bufs = [np.empty((rows, sites)) for _ in range(4)]
    mod.rhs(1, U, V, P[0], np.ascontiguousarray(G[0]), KU[0], KV[0])
    prefix = np.ascontiguousarray(np.cumsum(np.random.default_rng(1).normal(size=20_000)))
    E = np.ascontiguousarray(np.random.default_rng(2).uniform(0, 1, 200_000))
    F = np.ascontiguousarray(np.random.default_rng(3).normal(size=200_000))
    return {
        "rhs": lambda: mod.rhs(1, U, V, P[0], np.ascontiguousarray(G[0]), dU, dV),
        "dp5_step": lambda: mod.dp5_step(1, U, V, 0.05, P, G, KU, KV, *bufs, 1e-8, 1e-10),
        "window_extrema": lambda: mod.window_extrema(prefix, 5000, 5100),
        "linear_recurrence": lambda: mod.linear_recurrence(E, F, 0.0),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--sites", type=int, default=4000)
    ap.add_argument("--rows", type=int, default=16)
    args = ap.parse_args(argv)

    mods = kernels.backends()
    if "cython" not in mods:
        print("compiled kernels not built; only the numpy fallback is available")
    cases = {name: _cases(mod, args.rows, args.sites) for name, mod in mods.items()}
    print(f"{'kernel':<20}" + "".join(f"{n:>14}" for n in mods) + f"{'speed-up':>12}")
    for kernel in cases["python"]:
        best = {}
        for name in mods:
            fn = cases[name][kernel]
            n = max(1, int(0.2 / max(timeit.timeit(fn, number=1), 1e-6)))
            best[name] = min(timeit.repeat(fn, number=n, repeat=args.repeat)) / n
        ratio = best["python"] / best["cython"] if "cython" in best else float("nan")
        print(f"{kernel:<20}" + "".join(f"{best[n] * 1e3:>12.3f}ms" for n in mods) + f"{ratio:>11.1f}x")


if __name__ == "__main__":
    main()
