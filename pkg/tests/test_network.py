import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roster_lab.network import (
    Belief,
    Edge,
    FlowState,
    NetworkError,
    RouteCapacityError,
    RouteSet,
    TrafficNetwork,
    congestion_with_driver,
    edge_travel_time,
    enumerate_disjoint_routes,
    expected_route_time,
    network_congestion,
    route_table,
    route_travel_time,
)
from roster_lab.scenarios import bundled_network, sioux_falls


def one_edge(tff=0.25, cap=2000.0):
    return TrafficNetwork.build([Edge(7, 1, 2, tff, cap)])


@pytest.mark.parametrize("flow,expected", [(0.0, 0.25), (2000.0, 0.2875), (4000.0, 0.85)])
def test_bpr_closed_form(flow, expected):
    assert edge_travel_time(one_edge(), 7, flow) == pytest.approx(expected, rel=1e-12)


def test_bpr_errors():
    net = one_edge()
    with pytest.raises(KeyError):
        edge_travel_time(net, 99, 0.0)
    with pytest.raises(NetworkError):
        edge_travel_time(net, 7, -1.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 1e5), st.floats(1e-3, 1e4))
def test_bpr_monotone(f, df):
    net = one_edge()
    a, b = edge_travel_time(net, 7, f), edge_travel_time(net, 7, f + df)
    assert a >= 0.25
    assert b >= a
    if f >= 100.0:
        # at very light flow the increment is under double-precision resolution
        assert b > a


def test_bpr_lambda_zero_is_flat():
    net = TrafficNetwork.build([Edge(1, 1, 2, 0.3, 100.0)], bpr_lambda=0.0)
    assert edge_travel_time(net, 1, 0.0) == edge_travel_time(net, 1, 1e6) == 0.3


@pytest.mark.parametrize("kwargs", [
    dict(edges=()),
    dict(edges=(Edge(1, 1, 2, 0.0, 10.0),)),
    dict(edges=(Edge(1, 1, 2, 0.1, 0.0),)),
    dict(edges=(Edge(1, 1, 9, 0.1, 10.0),)),
    dict(edges=(Edge(1, 1, 2, 0.1, 10.0), Edge(1, 2, 1, 0.1, 10.0))),
    dict(edges=(Edge(1, 1, 2, 0.1, 10.0),), bpr_lambda=-0.1),
    dict(edges=(Edge(1, 1, 2, 0.1, 10.0),), bpr_beta=0.5),
])
def test_network_invariants(kwargs):
    with pytest.raises(NetworkError):
        TrafficNetwork(frozenset({1, 2}), **kwargs)


def test_flow_state_validation(pigou_net):
    with pytest.raises(NetworkError):
        FlowState.for_network(pigou_net, [1.0])
    with pytest.raises(NetworkError):
        FlowState.for_network(pigou_net, [1.0, -2.0])
    with pytest.raises(NetworkError):
        Belief.for_network(pigou_net, [1.0, math.nan])


def test_route_time_additivity():
    net = TrafficNetwork.build([Edge(1, 1, 2, 0.25, 2000.0), Edge(2, 2, 3, 0.25, 2000.0)])
    flows = FlowState.for_network(net, [2000.0, 4000.0])
    assert route_travel_time(net, (1, 2), flows) == pytest.approx(1.1375, rel=1e-12)
    assert route_travel_time(net, (1, 2), FlowState.zeros(net)) == pytest.approx(0.5)
    with pytest.raises(KeyError):
        route_travel_time(net, (1, 3), flows)


def test_expected_time_uses_mean_flow():
    net = one_edge()
    assert expected_route_time(net, (7,), Belief.for_network(net, [2000.0])) == pytest.approx(0.2875, rel=1e-12)


def test_degenerate_belief_matches_realized(rng):
    spec = sioux_falls()
    flows = FlowState.for_network(spec.network, rng.uniform(0, 2 * spec.network.cap))
    for route in spec.route_set.routes:
        assert expected_route_time(spec.network, route, Belief.exact(flows)) == route_travel_time(
            spec.network, route, flows)


def test_expected_time_matches_per_edge_oracle(rng):
    spec = sioux_falls()
    net = spec.network
    q = rng.uniform(0, 2 * net.cap)
    for route in spec.route_set.routes:
        oracle = 0.0
        for eid in route:
            e = net.edge(eid)
            oracle += e.free_flow_time * (1 + 0.15 * (q[net.edge_index(eid)] / e.capacity) ** 4)
        assert expected_route_time(net, route, Belief.for_network(net, q)) == pytest.approx(oracle, rel=1e-12)


def test_congestion_all_edges(pigou_net):
    assert network_congestion(pigou_net, FlowState.zeros(pigou_net)) == pytest.approx(16 / 65 + 0.2)
    at_cap = FlowState.for_network(pigou_net, [4000.0, 2000.0])
    assert network_congestion(pigou_net, at_cap) == pytest.approx(1.15 * (16 / 65 + 0.2), rel=1e-12)


def test_congestion_matches_edge_loop(rng):
    net = bundled_network("sioux_falls")
    f = rng.uniform(0, 2 * net.cap)
    loop = sum(e.free_flow_time * (1 + 0.15 * (f[i] / e.capacity) ** 4) for i, e in enumerate(net.edges))
    assert network_congestion(net, FlowState.for_network(net, f)) == pytest.approx(loop, rel=1e-12)


def test_congestion_with_driver_unit_capacity():
    net = TrafficNetwork.build([Edge(1, 1, 2, 0.5, 1.0), Edge(2, 1, 2, 0.3, 5.0)])
    got = congestion_with_driver(net, FlowState.zeros(net), (1,))
    assert got == pytest.approx(0.5 * 1.15 + 0.3, rel=1e-12)


def test_driver_always_adds_congestion(rng):
    spec = sioux_falls()
    flows = FlowState.for_network(spec.network, rng.uniform(0, 2 * spec.network.cap))
    base = network_congestion(spec.network, flows)
    for r in spec.route_set.routes:
        assert congestion_with_driver(spec.network, flows, r) > base


def test_route_table_agrees_with_scalar_functions(rng):
    spec = sioux_falls()
    net, rs = spec.network, spec.route_set
    flows = FlowState.for_network(net, rng.uniform(0, 2 * net.cap))
    table = route_table(net, rs, flows.flow)
    assert table.base == pytest.approx(network_congestion(net, flows), rel=1e-13)
    for k, r in enumerate(rs.routes):
        assert table.times[k] == pytest.approx(route_travel_time(net, r, flows), rel=1e-13)
        assert table.with_driver[k] == pytest.approx(congestion_with_driver(net, flows, r), rel=1e-13)
    assert min(table.with_driver) == min(congestion_with_driver(net, flows, r) for r in rs.routes) or \
        min(table.with_driver) == pytest.approx(min(congestion_with_driver(net, flows, r) for r in rs.routes))


def test_pigou_routes(pigou_net):
    rs = enumerate_disjoint_routes(pigou_net, 1, 2, 2)
    assert rs.routes == ((2,), (1,))  # 0.2 h beats 16/65 h


def test_disjoint_routes_capacity_error(diamond_net):
    rs = enumerate_disjoint_routes(diamond_net, 1, 4, 2)
    assert rs.routes == ((1, 2), (3, 4))
    with pytest.raises(RouteCapacityError) as err:
        enumerate_disjoint_routes(diamond_net, 1, 4, 3)
    assert err.value.achievable == 2
    with pytest.raises(NetworkError):
        enumerate_disjoint_routes(diamond_net, 1, 1, 2)


def test_sioux_falls_routes_disjoint_and_sorted():
    spec = sioux_falls()
    net, routes = spec.network, spec.route_set.routes
    assert len(routes) == 4
    edges = [e for r in routes for e in r]
    assert len(edges) == len(set(edges))
    ff = [sum(net.edge(e).free_flow_time for e in r) for r in routes]
    assert ff == sorted(ff)
    assert enumerate_disjoint_routes(net, 10, 20, 4).routes == routes


@pytest.mark.parametrize("routes,msg", [
    (((1, 2),), "at least two"),
    (((1, 2), (1, 5, 4)), "shared"),
    (((1, 2), (3,)), "does not end"),
    (((2,), (3, 4)), "not connected"),
])
def test_route_set_validation(diamond_net, routes, msg):
    with pytest.raises(NetworkError, match=msg):
        RouteSet(1, 4, routes).bind(diamond_net)
