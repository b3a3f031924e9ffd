"""System agent: ROSTER recommendation and regret-driven trust prediction."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from roster_lab import kernels
from roster_lab.driver import ZERO_REGRET_TOL, UniformStream, _draws
from roster_lab.game import (
    REJECT,
    CostParams,
    GameStateError,
    History,
    Recommendation,
    discount_table,
    game_tree,
    history_prefix,
)


@dataclass(frozen=True)
class TrustPrediction:
    alpha_hat: float = 0.5
    epsilon: float = 0.00015
    eta0: float = 0.0025
    last_predicted_regret: float | None = None
    last_rate: float = 0.0


@dataclass
class SystemAgent:
    """System view of one interaction.

    ``advertised`` holds E_p(T(r)), ``congestion`` the network congestion with
    the driver on route r under belief p, and ``driver_estimate`` the system's
    stand-in for the driver's own expectations E_q(T(r)).
    """

    advertised: np.ndarray
    congestion: np.ndarray
    driver_estimate: np.ndarray
    trust: TrustPrediction = field(default_factory=TrustPrediction)
    sample_budget: int = 5
    driver_sample_budget: int = 2
    cost_params: CostParams = field(default_factory=CostParams)
    discount: str = "eq3"
    _costs: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        if self.sample_budget < 1 or self.driver_sample_budget < 1:
            raise ValueError("sample budgets must be >= 1")

    @property
    def n_routes(self) -> int:
        return len(self.advertised)

    def predicted_outcome_costs(self, max_stages: int) -> np.ndarray:
        costs = self._costs.get(max_stages)
        if costs is None:
            tree = game_tree(self.n_routes, max_stages)
            disc = np.array(discount_table(self.cost_params.gamma_driver, max_stages, self.discount))
            costs = disc[tree.terminal_stage] * np.asarray(self.driver_estimate)[tree.final]
            self._costs[max_stages] = costs
        return costs

    def recommendation(self, route: int) -> Recommendation:
        return Recommendation(route, float(self.advertised[route]))


def predict_driver_blend(agent: SystemAgent, route: int) -> float:
    a = agent.trust.alpha_hat
    return a * float(agent.advertised[route]) + (1 - a) * float(agent.driver_estimate[route])


def predicted_driver_score(blend: float, discount: float) -> float:
    if discount < 1:
        raise ValueError("discount must be >= 1")
    return discount * blend


@dataclass(frozen=True)
class DriverPrediction:
    action: int
    accepted: bool
    mu_hat: float
    blend: float
    score: float
    best_route: int
    best_stage: int


def _predict(agent: SystemAgent, tree, prefix: tuple[int, ...], rec: int, stream: UniformStream,
             disc_d) -> DriverPrediction:
    lo, hi = tree.rejection_block(prefix, rec)
    if hi <= lo:
        raise GameStateError("no rejection outcomes available")
    g = agent.driver_sample_budget
    costs = agent.predicted_outcome_costs(tree.max_stages)
    mu, best, _ = kernels.sampled_summary(costs, tree.final, lo, hi, g, _draws(stream, lo, hi, g), 0)
    stage = len(prefix) + 1
    blend = predict_driver_blend(agent, rec)
    score = disc_d[stage] * blend
    best_route = int(tree.final[best])
    best_stage = int(tree.terminal_stage[best])
    if score <= mu:
        return DriverPrediction(rec, True, mu, blend, score, best_route, best_stage)
    action = best_route if stage == tree.max_stages else REJECT
    return DriverPrediction(action, False, mu, blend, score, best_route, best_stage)


def predict_driver_action(agent: SystemAgent, history: History, rec: Recommendation | int,
                          stream: UniformStream) -> DriverPrediction:
    """Mirror the driver's sampled decision with the predicted trust."""
    route = rec.route_index if isinstance(rec, Recommendation) else rec
    tree = game_tree(history.n_routes, history.max_stages)
    disc_d = discount_table(agent.cost_params.gamma_driver, history.max_stages, agent.discount)
    return _predict(agent, tree, history_prefix(history), route, stream, disc_d)


@dataclass(frozen=True)
class RosterChoice:
    recommendation: Recommendation
    prediction: DriverPrediction
    candidate_costs: dict


def roster_recommend(agent: SystemAgent, history: History, stream: UniformStream) -> RosterChoice:
    """Pick the recommendation with the lowest predicted system cost over a sampled outcome subtree.

    Each sampled outcome contributes its recommendation sequence. Along it the
    driver's response is predicted stage by stage; a predicted rejection
    continues into the next sampled recommendation, or, when no sampled path
    continues, settles on the driver's predicted best counterfactual outcome.
    With every outcome sampled this is exact backward induction.
    """
    if history.is_terminal or not history.available_routes:
        raise GameStateError("no recommendation can be made")
    tree = game_tree(history.n_routes, history.max_stages)
    prefix = history_prefix(history)
    node = tree.node(prefix)
    g = agent.sample_budget
    picked, _ = kernels.sample_block(node.start, node.end, g, _draws(stream, node.start, node.end, g), 0)
    disc_d = discount_table(agent.cost_params.gamma_driver, tree.max_stages, agent.discount)
    disc_s = discount_table(agent.cost_params.gamma_system, tree.max_stages, agent.discount)
    psi = agent.congestion
    predictions: dict = {}
    paths = tree.paths

    def evaluate(pre: tuple[int, ...], rows: list[int]) -> dict:
        depth = len(pre)
        stage = depth + 1
        groups: dict = {}
        for o in rows:
            groups.setdefault(paths[o][depth][0], []).append(o)
        scores = {}
        for r in sorted(groups):
            key = (pre, r)
            pred = predictions.get(key)
            if pred is None:
                pred = predictions[key] = _predict(agent, tree, pre, r, stream, disc_d)
            if pred.accepted:
                scores[r] = disc_s[stage] * float(psi[r])
            elif stage == tree.max_stages:
                scores[r] = disc_s[stage] * float(psi[pred.action])
            else:
                onward = [o for o in groups[r] if paths[o][depth][1] == REJECT]
                if onward:
                    scores[r] = min(evaluate(pre + (r,), onward).values())
                else:
                    scores[r] = disc_s[pred.best_stage] * float(psi[pred.best_route])
        return scores

    scores = evaluate(prefix, picked)
    best = min(scores, key=lambda r: (scores[r], r))
    return RosterChoice(agent.recommendation(best), predictions[(prefix, best)], scores)


def predicted_driver_regret(stage: int, max_stages: int, recommended: int, action: int, mu_hat: float,
                            advertised: float, predicted_blend: float,
                            realized_time: float | None = None) -> float:
    """System's estimate of the driver's regret for the stage just played.

    ``realized_time`` is the travel time of the route the driver took; it is
    only consulted at the last stage.
    """
    accepted = action == recommended
    final = stage == max_stages
    if final and realized_time is None:
        raise ValueError("realized_time is required at the final stage")
    if accepted:
        return (realized_time if final else advertised) - mu_hat
    if final:
        return predicted_blend - realized_time
    return advertised - mu_hat


def update_trust_prediction(prediction: TrustPrediction, predicted_regret: float) -> TrustPrediction:
    rate = abs(prediction.epsilon * predicted_regret)
    if abs(predicted_regret) <= ZERO_REGRET_TOL:
        alpha_hat = prediction.alpha_hat + prediction.eta0
    elif predicted_regret < 0:
        alpha_hat = prediction.alpha_hat + rate
    else:
        alpha_hat = prediction.alpha_hat - rate
    alpha_hat = min(max(alpha_hat, 0.0), 1.0)
    return replace(prediction, alpha_hat=alpha_hat, last_predicted_regret=predicted_regret, last_rate=rate)
