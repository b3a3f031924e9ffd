"""Driver agent: sampled rejection scoring, accept rule and trust dynamics."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from roster_lab import kernels
from roster_lab.game import (
    REJECT,
    CostParams,
    GameStateError,
    History,
    Outcome,
    Recommendation,
    discount_table,
    game_tree,
    history_prefix,
)

ZERO_REGRET_TOL = 1e-12
# "magnitude": eta = min(|eps * dB|, 1); "clamp": eta = clamp(eps * dB, 0, 1)
RATE_RULES = ("magnitude", "clamp")


class UniformStream:
    """Buffered uniform draws from a numpy Generator, handed out in order."""

    def __init__(self, rng: np.random.Generator, block: int = 256):
        self.rng = rng
        self.block = block
        self._buf = np.empty(0)
        self._pos = 0

    def take(self, k: int) -> np.ndarray:
        if self._pos + k > len(self._buf):
            rest = self._buf[self._pos :]
            self._buf = np.concatenate([rest, self.rng.random(max(self.block, k))])
            self._pos = 0
        out = self._buf[self._pos : self._pos + k]
        self._pos += k
        return out


def _draws(stream: UniformStream, lo: int, hi: int, g: int) -> np.ndarray:
    n = hi - lo
    return stream.take(g if g < n else 0)


@dataclass(frozen=True)
class TrustState:
    alpha0: float
    alpha: float
    epsilon: float = 0.0002
    eta0: float = 0.0025
    acceptance_history: tuple[int, ...] = ()
    last_regret: float | None = None
    last_learning_rate: float = 0.0025
    rate_rule: str = "magnitude"

    def __post_init__(self):
        if self.rate_rule not in RATE_RULES:
            raise ValueError(f"rate_rule must be one of {RATE_RULES}")
        # a carried-over alpha0 may decay to 0; fresh drivers are checked in initial()
        if not 0 <= self.alpha0 <= 1:
            raise ValueError(f"alpha0 must be in [0, 1], got {self.alpha0}")

    @classmethod
    def initial(cls, alpha0: float, epsilon: float = 0.0002, eta0: float = 0.0025,
                rate_rule: str = "magnitude") -> "TrustState":
        if not 0 < alpha0 <= 1:
            raise ValueError(f"initial trust must be in (0, 1], got {alpha0}")
        return cls(alpha0, alpha0, epsilon, eta0, last_learning_rate=eta0, rate_rule=rate_rule)

    def with_acceptance(self, accepted: bool) -> "TrustState":
        return replace(self, acceptance_history=self.acceptance_history + (int(accepted),))

    def next_interaction(self) -> "TrustState":
        """Carry the current trust into a fresh interaction."""
        return replace(self, alpha0=self.alpha, acceptance_history=(), last_regret=None)


def weighted_trust(alpha0: float, eta: float, accepts) -> float:
    """``(1-eta)^m * alpha0 + sum_i eta * (1-eta)^i * C_i`` over the acceptance record."""
    m = len(accepts)
    keep = 1.0 - eta
    total = keep**m * alpha0
    for i, c in enumerate(accepts):
        total += eta * keep**i * c
    return total


def update_trust(trust: TrustState, stage_index: int, regret: float) -> TrustState:
    """Recency-weighted trust update after stage ``stage_index`` (1-based).

    ``trust.acceptance_history`` must already include this stage.
    """
    if len(trust.acceptance_history) != stage_index:
        raise GameStateError("acceptance history out of step with stage index")
    if abs(regret) <= ZERO_REGRET_TOL:
        return replace(trust, last_regret=regret)
    gradient = regret if trust.last_regret is None else regret - trust.last_regret
    step = trust.epsilon * gradient
    eta = min(abs(step), 1.0) if trust.rate_rule == "magnitude" else min(max(step, 0.0), 1.0)
    alpha = weighted_trust(trust.alpha0, eta, trust.acceptance_history)
    alpha = min(max(alpha, 0.0), 1.0)
    return replace(trust, alpha=alpha, last_regret=regret, last_learning_rate=eta)


@dataclass(frozen=True)
class DriverDecision:
    action: int
    accepted: bool
    mu: float
    blended: float
    score: float
    best_outcome: Outcome


@dataclass
class DriverAgent:
    """Driver with belief-derived route expectations ``expected_times`` (hours per route)."""

    expected_times: np.ndarray
    trust: TrustState
    sample_budget: int = 2
    cost_params: CostParams = field(default_factory=CostParams)
    discount: str = "eq3"
    _costs: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        if self.sample_budget < 1:
            raise ValueError("sample_budget must be >= 1")

    def outcome_costs(self, max_stages: int) -> np.ndarray:
        """Counterfactual driver cost of every outcome row under the driver's own belief."""
        costs = self._costs.get(max_stages)
        if costs is None:
            tree = game_tree(len(self.expected_times), max_stages)
            disc = np.array(discount_table(self.cost_params.gamma_driver, max_stages, self.discount))
            costs = disc[tree.terminal_stage] * np.asarray(self.expected_times)[tree.final]
            self._costs[max_stages] = costs
        return costs


def sample_rejection_outcomes(agent: DriverAgent, history: History, rec: int,
                              stream: UniformStream) -> list[Outcome]:
    tree = game_tree(history.n_routes, history.max_stages)
    lo, hi = tree.rejection_block(history_prefix(history), rec)
    if hi <= lo:
        raise GameStateError("no rejection outcomes available")
    picked, _ = kernels.sample_block(lo, hi, agent.sample_budget, _draws(stream, lo, hi, agent.sample_budget), 0)
    return [tree.outcome(i) for i in picked]


def rejection_summary(agent: DriverAgent, samples: list[Outcome]) -> tuple[float, Outcome]:
    """Mean counterfactual cost of the samples and the cheapest one (lowest final route on ties)."""
    if not samples:
        raise ValueError("need at least one sample")
    disc = discount_table(agent.cost_params.gamma_driver, max(o.terminal_stage for o in samples), agent.discount)
    total = 0.0
    best = None
    best_cost = 0.0
    for o in samples:
        c = disc[o.terminal_stage] * float(agent.expected_times[o.driver_final_route])
        total += c
        if best is None or c < best_cost or (c == best_cost and o.driver_final_route < best.driver_final_route):
            best, best_cost = o, c
    return total / len(samples), best


def blended_expected_time(agent: DriverAgent, recommendation: Recommendation) -> float:
    a = agent.trust.alpha
    return a * recommendation.advertised_time + (1 - a) * float(agent.expected_times[recommendation.route_index])


def decide(agent: DriverAgent, history: History, recommendation: Recommendation,
           stream: UniformStream) -> DriverDecision:
    """Accept iff the discounted blended time is no worse than the mean rejection score."""
    tree = game_tree(history.n_routes, history.max_stages)
    prefix = history_prefix(history)
    rec = recommendation.route_index
    lo, hi = tree.rejection_block(prefix, rec)
    if hi <= lo:
        raise GameStateError("no rejection outcomes available")
    costs = agent.outcome_costs(history.max_stages)
    g = agent.sample_budget
    mu, best, _ = kernels.sampled_summary(costs, tree.final, lo, hi, g, _draws(stream, lo, hi, g), 0)
    stage = history.stage
    blended = blended_expected_time(agent, recommendation)
    disc = discount_table(agent.cost_params.gamma_driver, history.max_stages, agent.discount)
    score = disc[stage] * blended
    best_outcome = tree.outcome(best)
    if score <= mu:
        return DriverDecision(rec, True, mu, blended, score, best_outcome)
    action = int(tree.final[best]) if stage == history.max_stages else REJECT
    return DriverDecision(action, False, mu, blended, score, best_outcome)


def driver_regret(stage: int, max_stages: int, accepted: bool, advertised: float, mu: float,
                  blended: float, realized_time: float | None = None) -> float:
    """Intermediate regret ``E_p(T) - mu``; at the last stage it uses the realized time."""
    if stage != max_stages:
        return advertised - mu
    if realized_time is None:
        raise ValueError("realized_time is required at the final stage")
    if accepted:
        return realized_time - mu
    return blended - realized_time
