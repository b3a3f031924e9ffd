"""Compiled core versus pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat 5] [--runs 20]

Kernel timings call both modules directly. The end-to-end timing runs the
matched-seed comparison in a subprocess per backend, since the backend is
fixed at import.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from roster_lab import _pykernels
from roster_lab.game import game_tree
from roster_lab.scenarios import sample_flows, sioux_falls

try:
    from roster_lab import _ckernels
except ImportError:
    _ckernels = None

END_TO_END = """
import time
from roster_lab.harness import COMPARE_STRATEGIES, ExperimentConfig, run_experiment
t = time.perf_counter()
run_experiment(ExperimentConfig(n_runs={runs}, n_interactions=20), strategies=COMPARE_STRATEGIES, workers=1)
print(time.perf_counter() - t)
"""


def kernel_cases():
    spec = sioux_falls()
    net, rs = spec.network, spec.route_set
    flow = sample_flows(spec, np.random.default_rng(0)).flow
    tree = game_tree(4, 3)
    costs = np.random.default_rng(1).uniform(0.1, 1.0, len(tree))
    u = np.random.default_rng(2).random(5)
    lo, hi = tree.rejection_block((), 0)
    return {
        "bpr (76 edges)": lambda k: k.bpr(net.tff, net.cap, flow, 0.15, 4.0),
        "route_table (4 routes)": lambda k: k.route_table(net.tff, net.cap, flow, 0.15, 4.0, rs.ptr, rs.idx),
        "sample_block (g=5)": lambda k: k.sample_block(lo, hi, 5, u, 0),
        "sampled_summary (g=5)": lambda k: k.sampled_summary(costs, tree.final, lo, hi, 5, u, 0),
    }


def time_call(fn, repeat: int) -> float:
    timer = timeit.Timer(fn)
    n, _ = timer.autorange()
    return min(timer.repeat(repeat, n)) / n * 1e6


def end_to_end(pure: bool, runs: int) -> float:
    env = dict(os.environ, ROSTER_LAB_PURE_PYTHON="1" if pure else "0")
    out = subprocess.run([sys.executable, "-c", END_TO_END.format(runs=runs)], env=env, check=True,
                         capture_output=True, text=True)
    return float(out.stdout.strip())


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--runs", type=int, default=20, help="runs in the end-to-end comparison")
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled extension not built; only the fallback is available")
    print(f"{'kernel':<24}{'cython us':>12}{'python us':>12}{'speedup':>10}")
    for name, call in kernel_cases().items():
        py = time_call(lambda: call(_pykernels), args.repeat)
        if _ckernels is None:
            print(f"{name:<24}{'-':>12}{py:>12.2f}{'-':>10}")
            continue
        cy = time_call(lambda: call(_ckernels), args.repeat)
        print(f"{name:<24}{cy:>12.2f}{py:>12.2f}{py / cy:>9.1f}x")
    label = f"compare, {args.runs} runs x 20"
    py = end_to_end(True, args.runs)
    if _ckernels is None:
        print(f"{label:<24}{'-':>12}{py:>11.2f}s")
        return
    cy = end_to_end(False, args.runs)
    print(f"{label:<24}{cy:>11.2f}s{py:>11.2f}s{py / cy:>9.1f}x")


if __name__ == "__main__":
    main()
