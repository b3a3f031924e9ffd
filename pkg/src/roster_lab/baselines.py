"""Reference recommendation and driver selection policies."""
from __future__ import annotations

import enum
from typing import Sequence

from roster_lab.game import REJECT, GameStateError, History, Recommendation


class StrategyKind(str, enum.Enum):
    ROSTER = "ROSTER"
    TASR = "TASR"
    LLF = "LLF"
    SAMPLED = "SAMPLED"
    SR = "SR"
    FC = "FC"
    AR = "AR"


SYSTEM_STRATEGIES = (StrategyKind.ROSTER, StrategyKind.TASR, StrategyKind.LLF)
DRIVER_STRATEGIES = (StrategyKind.SAMPLED, StrategyKind.SR, StrategyKind.FC, StrategyKind.AR)


def _argmin(values: Sequence[float], routes: Sequence[int]) -> int:
    return min(routes, key=lambda r: (values[r], r))


def _argmax(values: Sequence[float], routes: Sequence[int]) -> int:
    return min(routes, key=lambda r: (-values[r], r))


def baseline_recommend(kind: StrategyKind, available_routes: Sequence[int],
                       advertised: Sequence[float]) -> Recommendation:
    """LLF recommends the slowest available route, TASR the fastest, both by the system belief."""
    if not available_routes:
        raise GameStateError("no routes left to recommend")
    kind = StrategyKind(kind)
    if kind is StrategyKind.LLF:
        r = _argmax(advertised, available_routes)
    elif kind is StrategyKind.TASR:
        r = _argmin(advertised, available_routes)
    else:
        raise ValueError(f"{kind.value} is not a baseline recommender")
    return Recommendation(r, float(advertised[r]))


def optimal_recommend(available_routes: Sequence[int], congestion: Sequence[float],
                      advertised: Sequence[float]) -> Recommendation:
    """Recommendation minimizing network congestion with the driver on it."""
    if not available_routes:
        raise GameStateError("no routes left to recommend")
    r = _argmin(congestion, available_routes)
    return Recommendation(r, float(advertised[r]))


def selfish_route(expected_times: Sequence[float], routes: Sequence[int] | None = None) -> int:
    if routes is None:
        routes = range(len(expected_times))
    return _argmin(expected_times, list(routes))


def baseline_select(kind: StrategyKind, expected_times: Sequence[float], history: History,
                    recommendation: Recommendation | None) -> int:
    """Driver action under SR, FC or AR.

    SR ignores the recommendation and returns its selfish route directly.
    """
    kind = StrategyKind(kind)
    if kind is StrategyKind.SR:
        return selfish_route(expected_times)
    if recommendation is None:
        raise GameStateError(f"{kind.value} needs a recommendation")
    if kind is StrategyKind.FC:
        return recommendation.route_index
    if kind is StrategyKind.AR:
        if history.stage < history.max_stages:
            return REJECT
        permitted = [r for r in range(history.n_routes) if r != recommendation.route_index]
        return selfish_route(expected_times, permitted)
    raise ValueError(f"{kind.value} is not a baseline driver policy")
