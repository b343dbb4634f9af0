"""
Benchmark the two path-kernel lanes (numba JIT vs pure numpy) on the same
workload and confirm they agree before timing.

Usage: python3 benchmarks/bench_kernels.py [--paths N] [--steps N] [--repeats K]
"""
import argparse
import time

import numpy as np

from qsdlab.backend import HAVE_NUMBA
from qsdlab.diffusion import Diffusion1D
from qsdlab.montecarlo import PathConfig, simulate_killed_paths


def run_once(d, x0, cfg, backend):
    start = time.perf_counter()
    ens = simulate_killed_paths(d, x0, cfg, backend=backend)
    return time.perf_counter() - start, ens


def bench(backend, d, x0, cfg, repeats):
    # one warmup pass so JIT compilation never lands in the timed runs
    _, ens = run_once(d, x0, cfg, backend)
    times = []
    for _ in range(repeats):
        dt, _ = run_once(d, x0, cfg, backend)
        times.append(dt)
    return min(times), ens


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--paths", type=int, default=20000)
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    d = Diffusion1D.from_json({
        "interval": [0.0, np.pi],
        "drift": "0.2*sin(x)",
        "killing": "0.1*(1+x)",
    })
    dt = 1e-3
    cfg = PathConfig(dt=dt, horizon=args.steps * dt, n_paths=args.paths, seed=42)
    x0 = 1.2
    work = args.paths * args.steps

    t_np, ens_np = bench("numpy", d, x0, cfg, args.repeats)
    print(f"numpy : {t_np:8.3f} s   {work / t_np / 1e6:7.1f} M path-steps/s")

    if not HAVE_NUMBA:
        print("numba : not installed, skipping")
        return

    t_nb, ens_nb = bench("numba", d, x0, cfg, args.repeats)
    print(f"numba : {t_nb:8.3f} s   {work / t_nb / 1e6:7.1f} M path-steps/s")
    print(f"speedup: {t_np / t_nb:.1f}x")

    # the lanes share one counter-based stream, so discrete outcomes must
    # match exactly and positions to rounding
    assert np.array_equal(ens_np.statuses, ens_nb.statuses), "status mismatch"
    assert np.array_equal(ens_np.lifetimes, ens_nb.lifetimes), "lifetime mismatch"
    dx = np.max(np.abs(ens_np.xfinal - ens_nb.xfinal))
    print(f"agreement: statuses/lifetimes identical, max |dx| = {dx:.3g}")
    assert dx < 1e-12


if __name__ == "__main__":
    main()
