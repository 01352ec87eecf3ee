"""Compare the compiled and numpy accumulation kernels on synthetic product grids.

Run from the repository root after building the extension::

    python benchmarks/bench_accumulate.py
    python benchmarks/bench_accumulate.py --repeat 5 --cases 2:16:8 3:8:4

Each case is ``s:nt:nr`` (factors, angles per factor, Gauss nodes per simplex
coordinate).  Both backends get identical inputs; the script reports the best
wall time of each and the largest relative difference of the outputs.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from dbarsolve import accumulate as acc
from dbarsolve.quadrature import duffy_table


def make_inputs(s, nt, nr, n_comp=3, n_terms=4, seed=0):
    rng = np.random.default_rng(seed)
    tab = duffy_table(s, nr, grade=2)
    ntau = len(tab.tau)
    F = rng.standard_normal((n_comp, s, nt, ntau)) + 1j * rng.standard_normal((n_comp, s, nt, ntau))
    G = rng.standard_normal((n_terms, s, nt, ntau)) + 1j * rng.standard_normal((n_terms, s, nt, ntau))
    U = rng.uniform(0.05, 1.0, (s, nt, ntau)) * tab.tau[None, None, :] ** 2
    fgroup = np.arange(n_comp) % 2
    kpow = np.arange(n_terms) % 3
    pair_t = np.arange(n_terms)
    pair_g = np.arange(n_terms) % 2
    return (F, fgroup, G, kpow, U, tab.index, tab.weight, 2, pair_t, pair_g)


def best_time(fn, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def run_case(s, nt, nr, repeat, exclude):
    args = make_inputs(s, nt, nr)
    rows = []
    for mode in (0, 1):
        results = {}
        for backend in ("python", "cython"):
            results[backend] = best_time(
                lambda b=backend: acc.accumulate(*args, mode=mode, exclude=exclude, backend=b), repeat)
        ref = np.atleast_1d(results["python"][1])
        got = np.atleast_1d(results["cython"][1])
        diff = float(np.max(np.abs(got - ref)) / max(np.max(np.abs(ref)), 1e-300))
        rows.append((s, nt, nr, mode, results["python"][0], results["cython"][0], diff))
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cases", nargs="+", default=["2:16:8", "2:32:16", "3:8:4", "3:16:8"])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--exclude", type=float, default=1e-3, help="squared exclusion radius")
    args = ap.parse_args(argv)
    if acc._compiled is None:
        raise SystemExit("compiled kernel not built; run `pip install -e . --no-build-isolation` first")

    print(f"{'s':>2} {'nt':>4} {'nr':>4} {'mode':>4} {'python s':>10} {'cython s':>10} {'speedup':>8} {'rel diff':>10}")
    for case in args.cases:
        s, nt, nr = (int(x) for x in case.split(":"))
        for s_, nt_, nr_, mode, tp, tc, diff in run_case(s, nt, nr, args.repeat, args.exclude):
            print(f"{s_:>2} {nt_:>4} {nr_:>4} {mode:>4} {tp:>10.4f} {tc:>10.4f} {tp / tc:>8.1f} {diff:>10.2e}")


if __name__ == "__main__":
    main()
