"""Self-checks behind the ``verify`` subcommand.

Each check returns a list of failure messages; an empty list means it passed.
"""
from __future__ import annotations

from dataclasses import replace

import numpy as np

from roster_lab import _pykernels, kernels
from roster_lab.driver import DriverAgent, TrustState, UniformStream, decide
from roster_lab.game import CostParams, History, exhaustive_equilibrium, game_tree
from roster_lab.harness import COMPARE_STRATEGIES, ExperimentConfig, run_experiment
from roster_lab.system import SystemAgent, TrustPrediction, roster_recommend

FULL_BUDGET = 10**6


def random_instance(rng: np.random.Generator, max_routes: int = 4):
    n = int(rng.integers(2, max_routes + 1))
    m_star = int(rng.integers(1, min(n, 3) + 1))
    advertised = rng.uniform(0.1, 1.0, n)
    driver_times = rng.uniform(0.1, 1.0, n)
    congestion = rng.uniform(5.0, 6.0, n)
    alpha = float(rng.uniform(0.0, 1.0))
    return advertised, driver_times, congestion, alpha, m_star


def full_budget_rollout(advertised, driver_times, congestion, alpha, m_star, cost_params=None,
                        discount="eq3", seed=0) -> tuple[tuple[int, ...], int, int]:
    """Play ROSTER against the sampled driver with every budget saturated and a perfect trust estimate."""
    cost_params = cost_params or CostParams()
    trust = replace(TrustState.initial(max(alpha, 1e-9)), alpha=alpha)
    driver = DriverAgent(np.asarray(driver_times), trust, FULL_BUDGET, cost_params, discount)
    system = SystemAgent(np.asarray(advertised), np.asarray(congestion), np.asarray(driver_times),
                         TrustPrediction(alpha_hat=alpha), FULL_BUDGET, FULL_BUDGET, cost_params, discount)
    d_stream = UniformStream(np.random.default_rng([seed, 0]))
    s_stream = UniformStream(np.random.default_rng([seed, 1]))
    history = History(len(advertised), m_star)
    recs = []
    while not history.is_terminal:
        rec = roster_recommend(system, history, s_stream).recommendation
        recs.append(rec.route_index)
        history = history.advance(rec, decide(driver, history, rec, d_stream).action)
    return tuple(recs), history.final_route, len(history.stages)


def check_oracle(n_instances: int = 100, seed: int = 0) -> list[str]:
    rng = np.random.default_rng(seed)
    failures = []
    for i in range(n_instances):
        adv, times, cong, alpha, m_star = random_instance(rng)
        plan = exhaustive_equilibrium(adv, times, cong, alpha, CostParams(), m_star)
        got = full_budget_rollout(adv, times, cong, alpha, m_star, seed=i)
        want = (plan.recommendations, plan.final_route, plan.terminal_stage)
        if got != want:
            failures.append(f"instance {i}: rollout {got} != oracle {want}")
    return failures


def check_backends(n_cases: int = 200, seed: int = 0) -> list[str]:
    """The selected backend must agree bit for bit with the pure-Python fallback."""
    if kernels.BACKEND == "python":
        return []
    rng = np.random.default_rng(seed)
    failures = []
    tree = game_tree(4, 3)
    for i in range(n_cases):
        k = int(rng.integers(1, 8))
        tff = rng.uniform(0.01, 1.0, k)
        cap = rng.uniform(100, 5000, k)
        flow = rng.uniform(0, 2, k) * cap
        if not np.array_equal(kernels.bpr(tff, cap, flow, 0.15, 4.0), _pykernels.bpr(tff, cap, flow, 0.15, 4.0)):
            failures.append(f"case {i}: bpr differs")
        costs = rng.uniform(0.1, 1.0, len(tree))
        lo = int(rng.integers(0, len(tree) - 1))
        hi = int(rng.integers(lo + 1, len(tree) + 1))
        g = int(rng.integers(1, 8))
        u = rng.random(g)
        a = kernels.sampled_summary(costs, tree.final, lo, hi, g, u, 0)
        b = _pykernels.sampled_summary(costs, tree.final, lo, hi, g, u, 0)
        if a != b:
            failures.append(f"case {i}: sampled_summary {a} != {b}")
    return failures


def check_invariants(runs: int = 5, interactions: int = 10, seed: int = 0) -> list[str]:
    """Short matched-seed comparison; congestion bounds are asserted inside every rollout."""
    config = ExperimentConfig(n_runs=runs, n_interactions=interactions, seed=seed)
    result = run_experiment(config, strategies=COMPARE_STRATEGIES, workers=1)
    failures = []
    for row in result.summary:
        if row["strategy"] == "FC" and row["congestion_ratio"] != 1.0:
            failures.append("FC congestion ratio is not 1")
        if row["strategy"] == "SR" and row["travel_time_ratio"] != 1.0:
            failures.append("SR travel-time ratio is not 1")
    for r in result.records:
        if not 0.0 <= r.alpha <= 1.0 or not 0.0 <= r.alpha_hat <= 1.0:
            failures.append(f"trust out of range in run {r.run} interaction {r.interaction}")
    return failures


CHECKS = {"oracle": check_oracle, "backends": check_backends, "invariants": check_invariants}
