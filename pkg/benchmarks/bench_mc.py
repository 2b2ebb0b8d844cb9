"""Throughput of the Monte-Carlo kernels with and without numba.

    python benchmarks/bench_mc.py [--paths N] [--fallback-paths M]

The interpreter fallback is timed in a child process started with
RISKNET_DISABLE_NUMBA=1, because the switch is read once at import time.
"""
from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time


def workloads() -> dict:
    from risknet.cb_network import CbNetwork, SubsidiarySpec
    from risknet.levy_core import ClaimLaw, LevyModel
    from risknet.map_scale import MapModel
    from risknet.mc import SimConfig, simulate_dividends, simulate_map_rows, simulate_network_rows
    from risknet.mc.kernels import UPPER_REFLECT

    exp1 = ClaimLaw.exponential(1.0)
    scalar = LevyModel(2.0, 1.0, exp1)
    mm = MapModel(Q=[[-1.0, 1.0], [2.0, -2.0]], c=[2.0, 1.0], sigma=[0.0, 0.0], kill=[0.1, 0.1],
                  lam=[1.0, 0.5], claims=[ClaimLaw.exponential(1.5), exp1],
                  jumps={(0, 1): ClaimLaw.exponential(2.0)})
    net = CbNetwork(1.0, 1.0, [SubsidiarySpec(0.5, 1.5, 2.0, 1.0, exp1),
                               SubsidiarySpec(0.5, 1.0, 1.5, 0.5, exp1)])

    def timed(fn):
        def run(n):
            t0 = time.perf_counter()
            fn(n)
            return time.perf_counter() - t0
        return run

    return {
        "scalar_dividends": timed(lambda n: simulate_dividends(
            scalar, 3.0, SimConfig(n_paths=n, seed=1, q=0.1), x=1.0)),
        "map_dividends": timed(lambda n: simulate_map_rows(
            mm, SimConfig(n_paths=n, seed=1), 1.0, b=3.0, initial=[0.5, 0.5], upper=UPPER_REFLECT)),
        "network_ruin_t5": timed(lambda n: simulate_network_rows(
            net, SimConfig(n_paths=n, seed=1, horizon=5.0))),
    }


def child(n: int) -> None:
    # first call compiles (or loads from cache); time the second
    jobs = workloads()
    for f in jobs.values():
        f(min(n, 100))
    print(json.dumps({k: f(n) for k, f in jobs.items()}))


def run_child(n: int, disable_numba: bool) -> dict:
    env = dict(os.environ, RISKNET_DISABLE_NUMBA="1" if disable_numba else "0")
    out = subprocess.run([sys.executable, __file__, "--child", str(n)], env=env, check=True,
                         capture_output=True, text=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=200_000)
    ap.add_argument("--fallback-paths", type=int, default=2_000)
    ap.add_argument("--child", type=int, help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.child:
        child(args.child)
        return

    fast = run_child(args.paths, disable_numba=False)
    slow = run_child(args.fallback_paths, disable_numba=True)
    print(f"{'workload':<20s}{'numba paths/s':>16s}{'python paths/s':>16s}{'speed-up':>10s}")
    for name in fast:
        f = args.paths / fast[name]
        s = args.fallback_paths / slow[name]
        print(f"{name:<20s}{f:>16.4g}{s:>16.4g}{f / s:>10.1f}")
    print(f"threads: {os.environ.get('RISKNET_THREADS', 'default')}, cpus: {os.cpu_count()}")


if __name__ == "__main__":
    main()
