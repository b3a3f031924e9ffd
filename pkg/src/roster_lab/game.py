"""Multi-stage recommendation game: histories, outcomes, terminal costs.

Outcomes are enumerated depth-first in canonical order (recommended route
ascending; acceptance before rejection; final-stage alternatives ascending).
Under that order every partial history owns a contiguous block of outcome
rows, which is what the sampling code indexes into.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

REJECT = -1
MAX_STAGES = 3
EXHAUSTIVE_ROUTE_LIMIT = 5
DISCOUNT_CONVENTIONS = ("eq3", "example")


class GameStateError(RuntimeError):
    """Operation not valid in the current interaction state."""


class TractabilityError(ValueError):
    """Instance too large for exhaustive search."""


@dataclass(frozen=True)
class CostParams:
    gamma_driver: float = 1.125
    gamma_system: float = 1.125

    def __post_init__(self):
        if self.gamma_driver < 1 or self.gamma_system < 1:
            raise ValueError("discomfort multipliers must be >= 1")


def discount_factor(gamma: float, stage: int, convention: str = "eq3") -> float:
    """Multiplier applied to a cost settled at ``stage`` (1-based).

    ``eq3`` uses ``gamma**(stage-1)``; ``example`` uses ``gamma**stage``, which
    reproduces the 1.125 factor on a first-stage score.
    """
    if convention == "eq3":
        return gamma ** (stage - 1)
    if convention == "example":
        return gamma**stage
    raise ValueError(f"unknown discount convention {convention!r}")


def discount_table(gamma: float, max_stages: int, convention: str) -> tuple[float, ...]:
    """Index ``k`` holds the multiplier for stage ``k``; index 0 is unused."""
    return (0.0,) + tuple(discount_factor(gamma, k, convention) for k in range(1, max_stages + 1))


@dataclass(frozen=True)
class Recommendation:
    route_index: int
    advertised_time: float

    def __post_init__(self):
        if not self.advertised_time > 0:
            raise ValueError("advertised_time must be > 0")


@dataclass(frozen=True)
class History:
    n_routes: int
    max_stages: int
    stages: tuple[tuple[Recommendation, int], ...] = ()

    def __post_init__(self):
        if not 1 <= self.max_stages <= MAX_STAGES:
            raise ValueError(f"max_stages must be in 1..{MAX_STAGES}")
        if self.max_stages > self.n_routes:
            raise ValueError("max_stages cannot exceed the number of routes")

    @property
    def stage(self) -> int:
        """1-based index of the stage currently in play (or last played if terminal)."""
        return len(self.stages) + (0 if self.is_terminal else 1)

    @property
    def time_step(self) -> int:
        return 2 * len(self.stages)

    @property
    def recommended(self) -> tuple[int, ...]:
        return tuple(rec.route_index for rec, _ in self.stages)

    @property
    def available_routes(self) -> tuple[int, ...]:
        used = set(self.recommended)
        return tuple(r for r in range(self.n_routes) if r not in used)

    @property
    def is_terminal(self) -> bool:
        if not self.stages:
            return False
        rec, action = self.stages[-1]
        return action == rec.route_index or len(self.stages) == self.max_stages

    @property
    def final_route(self) -> int | None:
        if not self.is_terminal:
            return None
        return self.stages[-1][1]

    def advance(self, rec: Recommendation, action: int) -> "History":
        if self.is_terminal:
            raise GameStateError("interaction already finished")
        if rec.route_index not in self.available_routes:
            raise GameStateError(f"route {rec.route_index} is not available for recommendation")
        final = len(self.stages) + 1 == self.max_stages
        if final:
            if not 0 <= action < self.n_routes:
                raise GameStateError("final-stage action must name a route")
        elif action not in (rec.route_index, REJECT):
            raise GameStateError("intermediate action must accept or reject")
        return History(self.n_routes, self.max_stages, self.stages + ((rec, action),))


@dataclass(frozen=True)
class Outcome:
    """A terminal continuation: the full (recommended, action) path."""

    stages: tuple[tuple[int, int], ...]

    @property
    def driver_final_route(self) -> int:
        return self.stages[-1][1]

    @property
    def terminal_stage(self) -> int:
        return len(self.stages)

    @property
    def accepted(self) -> bool:
        rec, action = self.stages[-1]
        return rec == action


@dataclass
class _Node:
    stage: int
    start: int
    end: int
    blocks: dict = field(default_factory=dict)  # rec -> (lo, hi)


class GameTree:
    """Flat canonical outcome table for ``n_routes`` routes and ``max_stages`` stages."""

    def __init__(self, n_routes: int, max_stages: int):
        if max_stages > n_routes:
            raise ValueError("max_stages cannot exceed the number of routes")
        self.n_routes = n_routes
        self.max_stages = max_stages
        self.paths: list[tuple[tuple[int, int], ...]] = []
        self.nodes: dict[tuple[int, ...], _Node] = {}
        self._walk((), 1)
        self.final = np.array([p[-1][1] for p in self.paths], dtype=np.int64)
        self.terminal_stage = np.array([len(p) for p in self.paths], dtype=np.int64)

    def _walk(self, prefix: tuple[int, ...], stage: int):
        node = _Node(stage, len(self.paths), 0)
        self.nodes[prefix] = node
        head = tuple((r, REJECT) for r in prefix)
        for r in range(self.n_routes):
            if r in prefix:
                continue
            lo = len(self.paths)
            self.paths.append(head + ((r, r),))
            if stage < self.max_stages:
                self._walk(prefix + (r,), stage + 1)
            else:
                for a in range(self.n_routes):
                    if a != r:
                        self.paths.append(head + ((r, a),))
            node.blocks[r] = (lo, len(self.paths))
        node.end = len(self.paths)

    def __len__(self):
        return len(self.paths)

    def node(self, prefix: tuple[int, ...]) -> _Node:
        try:
            return self.nodes[prefix]
        except KeyError:
            raise GameStateError(f"no pending stage after rejecting {prefix}") from None

    def rejection_block(self, prefix: tuple[int, ...], rec: int) -> tuple[int, int]:
        lo, hi = self.node(prefix).blocks[rec]
        return lo + 1, hi

    def outcome(self, i: int) -> Outcome:
        return Outcome(self.paths[i])


@lru_cache(maxsize=None)
def game_tree(n_routes: int, max_stages: int) -> GameTree:
    return GameTree(n_routes, max_stages)


def history_prefix(history: History) -> tuple[int, ...]:
    if history.is_terminal:
        raise GameStateError("interaction already finished")
    return history.recommended


def enumerate_outcomes(history: History) -> list[Outcome]:
    """Every terminal continuation of a non-terminal history, in canonical order."""
    tree = game_tree(history.n_routes, history.max_stages)
    node = tree.node(history_prefix(history))
    return [tree.outcome(i) for i in range(node.start, node.end)]


def rejection_outcomes(history: History, rec: int) -> list[Outcome]:
    """Continuations in which the driver rejects ``rec`` at the current stage."""
    tree = game_tree(history.n_routes, history.max_stages)
    lo, hi = tree.rejection_block(history_prefix(history), rec)
    return [tree.outcome(i) for i in range(lo, hi)]


def driver_terminal_cost(outcome: Outcome, cost_params: CostParams, route_times: Sequence[float],
                         discount: str = "eq3") -> float:
    """Discounted travel time of the driver's final route."""
    k = outcome.terminal_stage
    return discount_factor(cost_params.gamma_driver, k, discount) * float(route_times[outcome.driver_final_route])


def system_terminal_cost(outcome: Outcome, cost_params: CostParams, route_congestion: Sequence[float],
                         discount: str = "eq3") -> float:
    """Discounted network congestion given the driver's final route."""
    k = outcome.terminal_stage
    return discount_factor(cost_params.gamma_system, k, discount) * float(route_congestion[outcome.driver_final_route])


@dataclass(frozen=True)
class EquilibriumPlan:
    recommendations: tuple[int, ...]
    final_route: int
    terminal_stage: int
    cost: float


def exhaustive_equilibrium(
    advertised: Sequence[float],
    driver_times: Sequence[float],
    congestion: Sequence[float],
    alpha: float,
    cost_params: CostParams,
    max_stages: int,
    discount: str = "eq3",
    recommended: tuple[int, ...] = (),
) -> EquilibriumPlan:
    """Backward induction over the full game tree.

    The driver follows the accept rule with complete rejection sets; the
    system picks the recommendation sequence minimizing its discounted
    congestion (lowest route index on ties). Independent of ``GameTree``.
    """
    n = len(advertised)
    if n > EXHAUSTIVE_ROUTE_LIMIT:
        raise TractabilityError(f"exhaustive search is limited to {EXHAUSTIVE_ROUTE_LIMIT} routes, got {n}")
    if not 1 <= max_stages <= min(n, MAX_STAGES):
        raise ValueError("invalid max_stages")
    gd, gs = cost_params.gamma_driver, cost_params.gamma_system

    def continuations(used, stage):
        # all terminal paths from this stage as (final_route, terminal_stage)
        for r in range(n):
            if r in used:
                continue
            yield r, r, stage
            if stage < max_stages:
                for _, final, k in continuations(used + (r,), stage + 1):
                    yield r, final, k
            else:
                for a in range(n):
                    if a != r:
                        yield r, a, stage

    def reject_stats(used, stage, r):
        rows = []
        if stage < max_stages:
            rows = [(f, k) for _, f, k in continuations(used + (r,), stage + 1)]
        else:
            rows = [(a, stage) for a in range(n) if a != r]
        total = 0.0
        best = None
        for f, k in rows:
            c = discount_factor(gd, k, discount) * driver_times[f]
            total += c
            if best is None or c < best[0] or (c == best[0] and f < best[1]):
                best = (c, f, k)
        return total / len(rows), best

    def solve(used, stage):
        best = None
        for r in range(n):
            if r in used:
                continue
            mu, (_, alt, alt_stage) = reject_stats(used, stage, r)
            blend = alpha * advertised[r] + (1 - alpha) * driver_times[r]
            if discount_factor(gd, stage, discount) * blend <= mu:
                plan = ((r,), r, stage, discount_factor(gs, stage, discount) * congestion[r])
            elif stage == max_stages:
                plan = ((r,), alt, stage, discount_factor(gs, stage, discount) * congestion[alt])
            else:
                recs, final, k, cost = solve(used + (r,), stage + 1)
                plan = ((r,) + recs, final, k, cost)
            if best is None or plan[3] < best[3]:
                best = plan
        return best

    recs, final, k, cost = solve(tuple(recommended), len(recommended) + 1)
    return EquilibriumPlan(recs, final, k, cost)
