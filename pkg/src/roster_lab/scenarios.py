"""Scenario construction, random state draws and network-file ingestion.

Network files are line oriented::

    # comment
    nodes <int> edges <int>
    <id> <from> <to> <free_flow_hours> <capacity_vph> <lanes>

Vertices are the integers ``1..nodes``.
"""
from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from roster_lab.game import MAX_STAGES
from roster_lab.network import (
    Belief,
    Edge,
    FlowState,
    NetworkError,
    RouteSet,
    TrafficNetwork,
    enumerate_disjoint_routes,
)

DEFAULT_BELIEF_NOISE = 0.2


class NetworkFileError(NetworkError):
    def __init__(self, message: str, line: int | None = None, path=None):
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)
        self.line = line
        self.path = path


def parse_network(text: str, path=None) -> TrafficNetwork:
    header = None
    edges: list[Edge] = []
    seen: dict[int, int] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if header is None:
            if len(parts) != 4 or parts[0] != "nodes" or parts[2] != "edges":
                raise NetworkFileError("expected header 'nodes <int> edges <int>'", lineno, path)
            try:
                header = (int(parts[1]), int(parts[3]))
            except ValueError:
                raise NetworkFileError("header counts must be integers", lineno, path) from None
            if header[0] < 1 or header[1] < 1:
                raise NetworkFileError("header counts must be positive", lineno, path)
            continue
        if len(parts) != 6:
            raise NetworkFileError(f"expected 6 fields, got {len(parts)}", lineno, path)
        try:
            eid, tail, head = int(parts[0]), int(parts[1]), int(parts[2])
            tff, cap = float(parts[3]), float(parts[4])
            lanes = int(parts[5])
        except ValueError as exc:
            raise NetworkFileError(f"malformed edge record ({exc})", lineno, path) from None
        if eid in seen:
            raise NetworkFileError(f"duplicate edge id {eid} (first on line {seen[eid]})", lineno, path)
        for v in (tail, head):
            if not 1 <= v <= header[0]:
                raise NetworkFileError(f"dangling endpoint {v} (nodes are 1..{header[0]})", lineno, path)
        if not (tff > 0 and cap > 0 and lanes >= 1):
            raise NetworkFileError("free-flow time, capacity and lanes must be positive", lineno, path)
        seen[eid] = lineno
        edges.append(Edge(eid, tail, head, tff, cap, lanes))
    if header is None:
        raise NetworkFileError("missing header", None, path)
    if len(edges) != header[1]:
        raise NetworkFileError(f"header declares {header[1]} edges, found {len(edges)}", None, path)
    return TrafficNetwork(frozenset(range(1, header[0] + 1)), tuple(edges))


def load_network_file(path) -> TrafficNetwork:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise NetworkFileError(f"cannot read network file ({exc.strerror})", None, path) from exc
    return parse_network(text, path)


def format_network(net: TrafficNetwork) -> str:
    lines = [f"nodes {len(net.vertices)} edges {net.n_edges}"]
    for e in net.edges:
        lines.append(f"{e.id} {e.tail} {e.head} {e.free_flow_time!r} {e.capacity!r} {e.lanes}")
    return "\n".join(lines) + "\n"


def bundled_network(name: str) -> TrafficNetwork:
    ref = resources.files("roster_lab") / "data" / f"{name}.net"
    with resources.as_file(ref) as p:
        return load_network_file(p)


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    network: TrafficNetwork
    route_set: RouteSet
    max_stages: int
    seed: int = 0
    belief_noise: float = DEFAULT_BELIEF_NOISE

    def __post_init__(self):
        if not 1 <= self.max_stages <= min(MAX_STAGES, self.route_set.n_routes):
            raise ValueError(f"max_stages must be in 1..{min(MAX_STAGES, self.route_set.n_routes)}")
        if self.belief_noise < 0:
            raise ValueError("belief_noise must be >= 0")


def manhattan_pigou(seed: int = 0, belief_noise: float = DEFAULT_BELIEF_NOISE) -> ScenarioSpec:
    """FDR Drive vs. 2nd Avenue; two routes, so a single-stage game."""
    net = bundled_network("manhattan_pigou")
    routes = enumerate_disjoint_routes(net, 1, 2, 2)
    return ScenarioSpec("manhattan_pigou", net, routes, 1, seed, belief_noise)


def sioux_falls(max_stages: int = 3, seed: int = 0, belief_noise: float = DEFAULT_BELIEF_NOISE) -> ScenarioSpec:
    """Four edge-disjoint routes from node 10 to node 20."""
    net = bundled_network("sioux_falls")
    routes = enumerate_disjoint_routes(net, 10, 20, 4)
    return ScenarioSpec("sioux_falls", net, routes, max_stages, seed, belief_noise)


SCENARIOS = {"manhattan_pigou": manhattan_pigou, "sioux_falls": sioux_falls}


def build_scenario(name: str, max_stages: int | None = None, seed: int = 0,
                   belief_noise: float = DEFAULT_BELIEF_NOISE) -> ScenarioSpec:
    if name not in SCENARIOS:
        raise ValueError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}")
    if name == "manhattan_pigou":
        if max_stages not in (None, 1, 2):
            raise ValueError("manhattan_pigou supports at most 2 stages")
        spec = manhattan_pigou(seed, belief_noise)
        if max_stages:
            spec = ScenarioSpec(spec.name, spec.network, spec.route_set, max_stages, seed, belief_noise)
        return spec
    return sioux_falls(max_stages or 3, seed, belief_noise)


def sample_flows(spec: ScenarioSpec, rng: np.random.Generator) -> FlowState:
    """Independent per-edge volumes, uniform on [0, 2 * capacity]."""
    return FlowState(_frozen(rng.uniform(0.0, 2.0 * spec.network.cap)))


def sample_driver_belief(spec: ScenarioSpec, true_flows: FlowState, rng: np.random.Generator,
                         noise: float | None = None) -> Belief:
    """Multiplicative uniform perturbation of the true volumes."""
    noise = spec.belief_noise if noise is None else noise
    if noise < 0:
        raise ValueError("noise must be >= 0")
    u = rng.uniform(1.0 - noise, 1.0 + noise, size=true_flows.flow.shape)
    return Belief(_frozen(np.maximum(true_flows.flow * u, 0.0)))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    a.flags.writeable = False
    return a
