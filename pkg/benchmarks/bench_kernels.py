"""Compare the numba and numpy trajectory kernels.

    python benchmarks/bench_kernels.py [--trajectories 2000] [--repeat 3]

Each workload runs once per backend to warm up (numba compiles on first
use), then ``--repeat`` timed runs; the best time is reported together
with the max difference between backends.
"""
import argparse
import time

import numpy as np

from hybridsim.jump import run_jump_ensemble
from hybridsim.models import build_dephasing, build_three_site, build_two_level
from hybridsim.noise import NoiseSpec
from hybridsim.state import TrajectoryState
from hybridsim.unravel import run_diffusive_ensemble


def workloads(M):
    model, init = build_three_site()
    plus = TrajectoryState(0.0, psi=np.array([1, 1], dtype=complex) / np.sqrt(2))
    mixed = TrajectoryState(0.0, sigma=0.5 * np.eye(2))
    spec = NoiseSpec("custom", C=[[1.0]])
    return {
        "jump (three-site, t=1, dt=1e-3)":
            lambda b, n: run_jump_ensemble(init, model, 1.0, 1e-3, n, seed=1, backend=b).psi,
        "diffusive pure (two-level G=0.8, t=0.3, dt=1e-3)":
            lambda b, n: run_diffusive_ensemble(plus, build_two_level(0.8), 0.3, 1e-3, n, seed=1, spec=spec,
                                                backend=b).states,
        "diffusive mixed (dephasing, t=0.3, dt=1e-3)":
            lambda b, n: run_diffusive_ensemble(mixed, build_dephasing(), 0.3, 1e-3, n, seed=1, mode="mixed",
                                                backend=b).states,
    }


def best_time(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trajectories", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    print(f"{'workload':52s} {'numpy [s]':>10s} {'numba [s]':>10s} {'speedup':>8s} {'max diff':>9s}")
    for name, run in workloads(args.trajectories).items():
        res = {}
        for b in ("numpy", "numba"):
            run(b, 8)  # warm-up / compile
            res[b] = best_time(lambda: run(b, args.trajectories), args.repeat)
        diff = np.abs(res["numpy"][1] - res["numba"][1]).max()
        tn, tb = res["numpy"][0], res["numba"][0]
        print(f"{name:52s} {tn:10.3f} {tb:10.3f} {tn / tb:8.1f} {diff:9.1e}")


if __name__ == "__main__":
    main()
