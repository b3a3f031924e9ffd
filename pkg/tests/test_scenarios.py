import numpy as np
import pytest

from roster_lab.scenarios import (
    NetworkFileError,
    ScenarioSpec,
    build_scenario,
    bundled_network,
    format_network,
    load_network_file,
    manhattan_pigou,
    parse_network,
    sample_driver_belief,
    sample_flows,
    sioux_falls,
)
from roster_lab.network import FlowState


def test_pigou_scenario():
    spec = manhattan_pigou()
    net = spec.network
    assert spec.max_stages == 1 and spec.route_set.n_routes == 2
    by_cap = {e.capacity: e.free_flow_time for e in net.edges}
    assert by_cap[4000.0] == pytest.approx(16 / 65, rel=1e-15)
    assert by_cap[2000.0] == 0.2


def test_sioux_falls_scenario():
    spec = sioux_falls()
    assert spec.route_set.n_routes == 4 and spec.max_stages == 3
    assert spec.route_set.origin == 10 and spec.route_set.destination == 20
    for m in (1, 2, 3):
        assert build_scenario("sioux_falls", m).max_stages == m
    with pytest.raises(ValueError):
        sioux_falls(4)
    with pytest.raises(ValueError):
        build_scenario("atlantis")


def test_sioux_falls_capacity_convention():
    net = bundled_network("sioux_falls")
    for e in net.edges:
        per_lane = e.capacity / e.lanes
        assert per_lane in (1000.0, 1900.0)


def test_edge_count_matches_declared(tmp_path):
    from importlib import resources

    text = (resources.files("roster_lab") / "data" / "sioux_falls.net").read_text()
    header = next(l for l in text.splitlines() if l.strip() and not l.startswith("#"))
    declared = int(header.split()[3])
    body = [l for l in text.splitlines() if l.strip() and not l.lstrip().startswith("#")][1:]
    assert declared == len(body) == bundled_network("sioux_falls").n_edges == 76


def test_round_trip():
    net = bundled_network("sioux_falls")
    again = parse_network(format_network(net))
    assert again.edges == net.edges and again.vertices == net.vertices
    assert format_network(again) == format_network(net)


def test_two_line_pigou_file(tmp_path):
    p = tmp_path / "p.net"
    p.write_text("# pigou\nnodes 2 edges 2\n1 1 2 0.246 4000 2\n2 1 2 0.2 2000 1  # avenue\n")
    assert load_network_file(p).n_edges == 2


@pytest.mark.parametrize("text,line,msg", [
    ("nodes 2 edges 2\n1 1 2 0.1 10 1\n1 2 1 0.1 10 1\n", 3, "duplicate edge id 1"),
    ("nodes 2 edges 1\n1 1 3 0.1 10 1\n", 2, "dangling endpoint 3"),
    ("nodes 2 edges 1\n1 1 2 0.1 10\n", 2, "expected 6 fields"),
    ("nodes 2 edges 1\n1 1 2 fast 10 1\n", 2, "malformed"),
    ("nodes 2 edges 1\n1 1 2 -0.1 10 1\n", 2, "positive"),
    ("edges 2\n", 1, "header"),
    ("nodes 2 edges x\n", 1, "integers"),
])
def test_parse_errors(text, line, msg):
    with pytest.raises(NetworkFileError, match=msg) as err:
        parse_network(text, "f.net")
    assert err.value.line == line
    assert f"f.net:{line}" in str(err.value)


def test_count_mismatch_and_missing(tmp_path):
    with pytest.raises(NetworkFileError, match="declares 2 edges, found 1"):
        parse_network("nodes 2 edges 2\n1 1 2 0.1 10 1\n")
    with pytest.raises(NetworkFileError, match="missing header"):
        parse_network("# nothing\n")
    with pytest.raises(NetworkFileError, match="cannot read"):
        load_network_file(tmp_path / "absent.net")


def test_flows_deterministic_and_bounded():
    spec = sioux_falls()
    a = sample_flows(spec, np.random.default_rng(4))
    b = sample_flows(spec, np.random.default_rng(4))
    assert np.array_equal(a.flow, b.flow)
    assert np.all(a.flow >= 0) and np.all(a.flow <= 2 * spec.network.cap)


def test_flow_mean_is_capacity():
    spec = manhattan_pigou()
    rng = np.random.default_rng(0)
    draws = np.array([sample_flows(spec, rng).flow for _ in range(100_000)])
    assert np.allclose(draws.mean(axis=0), spec.network.cap, rtol=0.02)


def test_belief_noise():
    spec = sioux_falls()
    flows = sample_flows(spec, np.random.default_rng(1))
    exact = sample_driver_belief(spec, flows, np.random.default_rng(2), noise=0.0)
    assert np.array_equal(exact.expected_flow, flows.flow)
    q = sample_driver_belief(spec, flows, np.random.default_rng(2))
    assert np.all(np.abs(q.expected_flow - flows.flow) <= 0.2 * flows.flow + 1e-9)
    with pytest.raises(ValueError):
        sample_driver_belief(spec, flows, np.random.default_rng(2), noise=-0.1)


def test_belief_ratio_mean():
    spec = sioux_falls()
    rng = np.random.default_rng(3)
    ratios = []
    for _ in range(500):
        f = sample_flows(spec, rng)
        ratios.append(sample_driver_belief(spec, f, rng).expected_flow / f.flow)
    assert np.mean(ratios) == pytest.approx(1.0, abs=0.02)


def test_spec_validation():
    spec = sioux_falls()
    with pytest.raises(ValueError):
        ScenarioSpec("x", spec.network, spec.route_set, 3, belief_noise=-1.0)
    with pytest.raises(ValueError):
        FlowState.for_network(spec.network, np.zeros(3))
