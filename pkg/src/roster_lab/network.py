"""Traffic graph, BPR latencies, flow states, beliefs and route enumeration.

Travel times are in hours and flows in vehicles per hour throughout.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from roster_lab import kernels


class NetworkError(ValueError):
    """Invalid network, flow or route data."""


class RouteCapacityError(NetworkError):
    """Fewer edge-disjoint routes exist than were requested."""

    def __init__(self, requested: int, achievable: int):
        super().__init__(
            f"requested {requested} edge-disjoint routes but only {achievable} could be extracted"
        )
        self.requested = requested
        self.achievable = achievable


@dataclass(frozen=True)
class Edge:
    id: int
    tail: int
    head: int
    free_flow_time: float
    capacity: float
    lanes: int = 1


@dataclass(frozen=True, eq=False)
class TrafficNetwork:
    vertices: frozenset
    edges: tuple[Edge, ...]
    bpr_lambda: float = 0.15
    bpr_beta: float = 4.0
    _index: dict = field(init=False, repr=False)
    tff: np.ndarray = field(init=False, repr=False)
    cap: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.edges) < 1:
            raise NetworkError("network needs at least one edge")
        if self.bpr_lambda < 0:
            raise NetworkError(f"bpr_lambda must be >= 0, got {self.bpr_lambda}")
        if self.bpr_beta < 1:
            raise NetworkError(f"bpr_beta must be >= 1, got {self.bpr_beta}")
        index = {}
        for i, e in enumerate(self.edges):
            if e.id in index:
                raise NetworkError(f"duplicate edge id {e.id}")
            if not e.free_flow_time > 0:
                raise NetworkError(f"edge {e.id}: free_flow_time must be > 0")
            if not e.capacity > 0:
                raise NetworkError(f"edge {e.id}: capacity must be > 0")
            if e.tail not in self.vertices or e.head not in self.vertices:
                raise NetworkError(f"edge {e.id}: endpoint not in vertex set")
            index[e.id] = i
        tff = np.array([e.free_flow_time for e in self.edges], dtype=np.float64)
        cap = np.array([e.capacity for e in self.edges], dtype=np.float64)
        tff.flags.writeable = False
        cap.flags.writeable = False
        object.__setattr__(self, "_index", index)
        object.__setattr__(self, "tff", tff)
        object.__setattr__(self, "cap", cap)

    @classmethod
    def build(cls, edges: Iterable[Edge], vertices: Iterable | None = None, **bpr) -> "TrafficNetwork":
        edges = tuple(edges)
        if vertices is None:
            vertices = {v for e in edges for v in (e.tail, e.head)}
        return cls(frozenset(vertices), edges, **bpr)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def edge_index(self, edge_id) -> int:
        try:
            return self._index[edge_id]
        except KeyError:
            raise KeyError(f"unknown edge id {edge_id!r}") from None

    def edge(self, edge_id) -> Edge:
        return self.edges[self.edge_index(edge_id)]


def _as_flow_vector(values, n: int, what: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    if arr.shape != (n,):
        raise NetworkError(f"{what} needs one entry per edge ({n}), got shape {arr.shape}")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise NetworkError(f"{what} entries must be finite and >= 0")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class FlowState:
    """Realized per-edge traffic volume, in network edge order."""

    flow: np.ndarray

    @classmethod
    def for_network(cls, net: TrafficNetwork, values) -> "FlowState":
        return cls(_as_flow_vector(values, net.n_edges, "flow"))

    @classmethod
    def zeros(cls, net: TrafficNetwork) -> "FlowState":
        return cls.for_network(net, np.zeros(net.n_edges))


@dataclass(frozen=True, eq=False)
class Belief:
    """Per-edge expected flow; stands in for a full volume distribution."""

    expected_flow: np.ndarray

    @classmethod
    def for_network(cls, net: TrafficNetwork, values) -> "Belief":
        return cls(_as_flow_vector(values, net.n_edges, "expected_flow"))

    @classmethod
    def exact(cls, flows: FlowState) -> "Belief":
        return cls(flows.flow)


@dataclass(frozen=True, eq=False)
class RouteSet:
    origin: int
    destination: int
    routes: tuple[tuple[int, ...], ...]
    ptr: np.ndarray = field(init=False, repr=False)
    idx: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "routes", tuple(tuple(r) for r in self.routes))

    @property
    def n_routes(self) -> int:
        return len(self.routes)

    def bind(self, net: TrafficNetwork) -> "RouteSet":
        """Validate against ``net`` and cache the CSR edge-index layout."""
        if self.n_routes < 2:
            raise NetworkError("a route set needs at least two routes")
        seen = set()
        ptr = [0]
        idx = []
        for k, route in enumerate(self.routes):
            if not route:
                raise NetworkError(f"route {k} is empty")
            at = self.origin
            visited = {at}
            for eid in route:
                e = net.edge(eid)
                if e.tail != at:
                    raise NetworkError(f"route {k} is not connected at edge {eid}")
                at = e.head
                if at in visited:
                    raise NetworkError(f"route {k} repeats vertex {at}")
                visited.add(at)
                if eid in seen:
                    raise NetworkError(f"edge {eid} is shared between routes")
                seen.add(eid)
                idx.append(net.edge_index(eid))
            if at != self.destination:
                raise NetworkError(f"route {k} does not end at {self.destination}")
            ptr.append(len(idx))
        object.__setattr__(self, "ptr", np.array(ptr, dtype=np.int64))
        object.__setattr__(self, "idx", np.array(idx, dtype=np.int64))
        return self


def edge_travel_time(net: TrafficNetwork, edge_id, flow: float) -> float:
    i = net.edge_index(edge_id)
    if flow < 0:
        raise NetworkError(f"flow must be >= 0, got {flow}")
    t = kernels.bpr(net.tff[i : i + 1], net.cap[i : i + 1], np.array([flow], dtype=np.float64),
                    net.bpr_lambda, net.bpr_beta)
    return float(t[0])


def _edge_times(net: TrafficNetwork, flow: np.ndarray) -> np.ndarray:
    return kernels.bpr(net.tff, net.cap, flow, net.bpr_lambda, net.bpr_beta)


def route_travel_time(net: TrafficNetwork, route: Sequence[int], flows: FlowState) -> float:
    times = _edge_times(net, flows.flow)
    total = 0.0
    for eid in route:
        total += float(times[net.edge_index(eid)])
    return total


def expected_route_time(net: TrafficNetwork, route: Sequence[int], belief: Belief) -> float:
    """BPR latency evaluated at the expected flow, summed over the route."""
    times = _edge_times(net, belief.expected_flow)
    total = 0.0
    for eid in route:
        total += float(times[net.edge_index(eid)])
    return total


def network_congestion(net: TrafficNetwork, flows: FlowState) -> float:
    """Total travel time over every edge of the network."""
    if flows.flow.shape != (net.n_edges,):
        raise NetworkError("flow state does not cover every edge")
    total = 0.0
    for v in _edge_times(net, flows.flow).tolist():
        total += v
    return total


def congestion_with_driver(net: TrafficNetwork, flows: FlowState, route: Sequence[int]) -> float:
    """Network congestion after one extra vehicle joins every edge of ``route``."""
    if flows.flow.shape != (net.n_edges,):
        raise NetworkError("flow state does not cover every edge")
    on_route = {net.edge_index(eid) for eid in route}
    bumped = flows.flow.copy()
    for i in on_route:
        bumped[i] += 1.0
    total = 0.0
    for v in _edge_times(net, bumped).tolist():
        total += v
    return total


@dataclass(frozen=True)
class RouteTable:
    """Per-route evaluation of one flow vector (realized or believed).

    ``times[r]`` is the route travel time; ``with_driver[r]`` the network
    congestion when the driver is added to route ``r``.
    """

    times: np.ndarray
    with_driver: np.ndarray
    base: float


def route_table(net: TrafficNetwork, route_set: RouteSet, flow: np.ndarray) -> RouteTable:
    times, wd, base = kernels.route_table(
        net.tff, net.cap, flow, net.bpr_lambda, net.bpr_beta, route_set.ptr, route_set.idx
    )
    return RouteTable(times, wd, base)


def _shortest_path(net: TrafficNetwork, removed: set, origin, destination):
    adj = {}
    for e in net.edges:
        if e.id not in removed:
            adj.setdefault(e.tail, []).append(e)
    # (distance, edge-id path) ordered lexicographically gives the tie rule
    heap = [(0.0, (), origin)]
    done = set()
    while heap:
        dist, path, v = heapq.heappop(heap)
        if v in done:
            continue
        done.add(v)
        if v == destination:
            return path
        for e in adj.get(v, ()):
            if e.head not in done:
                heapq.heappush(heap, (dist + e.free_flow_time, path + (e.id,), e.head))
    return None


def enumerate_disjoint_routes(net: TrafficNetwork, origin, destination, n_routes: int) -> RouteSet:
    """Extract ``n_routes`` edge-disjoint routes by repeated shortest-path removal."""
    if origin == destination:
        raise NetworkError("origin and destination must differ")
    removed: set = set()
    routes = []
    while len(routes) < n_routes:
        path = _shortest_path(net, removed, origin, destination)
        if path is None:
            raise RouteCapacityError(n_routes, len(routes))
        routes.append(path)
        removed.update(path)
    routes.sort(key=lambda r: (sum(net.edge(e).free_flow_time for e in r), r))
    return RouteSet(origin, destination, tuple(routes)).bind(net)
