import math
import xml.etree.ElementTree as ET
from dataclasses import replace

import numpy as np
import pytest

from roster_lab import charts
from roster_lab.harness import (
    COMPARE_STRATEGIES,
    RECORD_FIELDS,
    AgentState,
    ExperimentConfig,
    InvariantViolation,
    draw_interaction,
    emit_outputs,
    read_records,
    run_experiment,
    run_interaction,
    simulate,
    write_records,
)

SMALL = ExperimentConfig(n_runs=4, n_interactions=6, seed=11)


@pytest.fixture(scope="module")
def compare():
    return run_experiment(SMALL, strategies=COMPARE_STRATEGIES, alphas=[0.25, 1.0], workers=1)


def _rows(result, label):
    return [r for r in result.records if r.strategy == label]


def test_baseline_ratios_are_one(compare):
    for row in compare.summary:
        if row["strategy"] == "FC":
            assert row["congestion_ratio"] == 1.0
        if row["strategy"] == "SR":
            assert row["travel_time_ratio"] == 1.0
    assert len(compare.summary) == 2 * len(COMPARE_STRATEGIES)


def test_stage_counts(compare):
    assert all(r.stages == 1 for r in _rows(compare, "FC"))
    assert all(r.stages == 1 for r in _rows(compare, "SR"))
    assert all(r.stages == 3 for r in _rows(compare, "AR"))
    assert all(1 <= r.stages <= 3 for r in compare.records)


def test_fc_achieves_best_case(compare):
    for r in _rows(compare, "FC"):
        assert r.congestion_h == r.best_case_h


def test_matched_draws(compare):
    # every strategy sees the same network state, so the best case agrees row by row
    fc = {(r.alpha0, r.run, r.interaction): r.best_case_h for r in _rows(compare, "FC")}
    for label in COMPARE_STRATEGIES:
        for r in _rows(compare, label):
            assert r.best_case_h == fc[(r.alpha0, r.run, r.interaction)]


def test_trust_in_range(compare):
    for r in compare.records:
        assert 0.0 <= r.alpha <= 1.0 and 0.0 <= r.alpha_hat <= 1.0
        assert r.trust_err == pytest.approx((r.alpha_hat - r.alpha) ** 2)


def test_deterministic_and_worker_independent(compare):
    again = run_experiment(SMALL, strategies=COMPARE_STRATEGIES, alphas=[0.25, 1.0], workers=2)
    assert [r.__dict__ | {"wall_ms": 0} for r in again.records] == \
        [r.__dict__ | {"wall_ms": 0} for r in compare.records]


def test_run_order_is_stable():
    recs = simulate(SMALL, workers=1)
    assert [(r.run, r.interaction) for r in recs] == [(a, b) for a in range(4) for b in range(6)]


def test_shared_fields_enforced():
    with pytest.raises(ValueError, match="matched-seed"):
        simulate([SMALL, replace(SMALL, seed=12)], workers=1)


def test_carry_trust_off_resets():
    cfg = replace(SMALL, carry_trust=False, epsilon_driver=0.5, epsilon_system=0.5, n_runs=1)
    spec = cfg.build_scenario()
    state = AgentState.initial(cfg)
    first, _ = run_interaction(cfg, spec, state, 0, 0)
    bogus = AgentState(replace(state.trust, alpha=0.01), replace(state.prediction, alpha_hat=0.99))
    again, _ = run_interaction(cfg, spec, bogus, 0, 0)
    assert (again.alpha, again.alpha_hat) == (first.alpha, first.alpha_hat)


def test_invariant_violation_raised():
    spec = SMALL.build_scenario()
    draws = draw_interaction(SMALL, spec, 0, 0)
    bad = replace(draws, best_case=draws.ceiling * 2)
    with pytest.raises(InvariantViolation, match="run 0 interaction 0"):
        run_interaction(SMALL, spec, AgentState.initial(SMALL), 0, 0, bad)


def test_config_validation():
    for kw in ({"alpha0": 0.0}, {"alpha_hat0": 1.5}, {"n_runs": 0}, {"epsilon_driver": -1.0},
               {"system_strategy": "oracle"}, {"driver_strategy": "lazy"}, {"discount": "eq9"}):
        with pytest.raises(ValueError):
            ExperimentConfig(**kw)


def test_for_strategy_pairings():
    cfg = ExperimentConfig()
    assert cfg.for_strategy("FC").system_strategy == "optimal"
    assert cfg.for_strategy("AR").system_strategy == "roster"
    assert cfg.for_strategy("tasr").strategy == "TASR"
    assert cfg.for_strategy("SR").strategy == "SR"


def test_csv_round_trip(tmp_path, compare):
    path = tmp_path / "r.csv"
    write_records(compare.records, path)
    back = read_records(path)
    assert len(back) == len(compare.records)
    for a, b in zip(compare.records, back):
        for f in RECORD_FIELDS:
            if f == "wall_ms":
                assert math.isnan(getattr(b, f))
                continue
            x, y = getattr(a, f), getattr(b, f)
            if isinstance(x, float):
                assert float(f"{x:.12g}") == float(f"{y:.12g}")
            else:
                assert x == y


def test_timing_column(tmp_path):
    recs = simulate(replace(SMALL, record_timing=True, n_runs=1), workers=1)
    write_records(recs, tmp_path / "t.csv", record_timing=True)
    assert all(r.wall_ms >= 0 for r in read_records(tmp_path / "t.csv"))


def test_empty_records(tmp_path):
    write_records([], tmp_path / "e.csv")
    assert (tmp_path / "e.csv").read_text() == ",".join(RECORD_FIELDS) + "\n"
    assert read_records(tmp_path / "e.csv") == []


def test_outputs_and_charts(tmp_path, compare):
    files = emit_outputs(compare, tmp_path / "a")
    assert sorted(p.name for p in files) == sorted(
        ["records.csv", "summary.csv", "congestion_ratio.svg", "travel_time_ratio.svg", "trust_error.svg"])
    for p in files:
        if p.suffix == ".svg":
            ET.parse(p)
    again = emit_outputs(compare, tmp_path / "b")
    for p, q in zip(files, again):
        assert p.read_bytes() == q.read_bytes()


def test_empty_charts(tmp_path):
    paths = charts.write_charts([], {}, tmp_path)
    for p in paths:
        ET.parse(p)


def test_unwritable_output(tmp_path, compare):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError, match="cannot create"):
        emit_outputs(compare, blocker / "sub")
