"""Seeded experiment orchestration, metrics and output files."""
from __future__ import annotations

import csv
import logging
import math
import os
import time
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from roster_lab import kernels
from roster_lab.baselines import (
    StrategyKind,
    baseline_recommend,
    baseline_select,
    optimal_recommend,
    selfish_route,
)
from roster_lab.driver import DriverAgent, TrustState, UniformStream, decide, driver_regret, update_trust
from roster_lab.game import REJECT, CostParams, History
from roster_lab.network import Belief, route_table
from roster_lab.scenarios import ScenarioSpec, build_scenario, sample_driver_belief, sample_flows
from roster_lab.system import (
    SystemAgent,
    TrustPrediction,
    predicted_driver_regret,
    roster_recommend,
    update_trust_prediction,
)

log = logging.getLogger(__name__)

RECORD_FIELDS = ("run", "interaction", "strategy", "alpha0", "congestion_h", "travel_time_h", "stages",
                 "alpha", "alpha_hat", "trust_err", "wall_ms")
SUMMARY_FIELDS = ("scenario", "stages", "alpha0", "strategy", "runs", "interactions", "mean_congestion_h",
                  "mean_travel_time_h", "congestion_ratio", "travel_time_ratio", "mean_stages",
                  "mean_wall_ms", "final_trust_err")
COMPARE_STRATEGIES = ("FC", "ROSTER", "TASR", "LLF", "SR", "AR")
STREAM_FLOWS, STREAM_BELIEF, STREAM_DRIVER, STREAM_SYSTEM = range(4)
BOUND_RTOL = 1e-12


class InvariantViolation(AssertionError):
    """A congestion bound was breached during a rollout."""


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str = "sioux_falls"
    system_strategy: str = "roster"
    driver_strategy: str = "sampled"
    alpha0: float = 0.5
    alpha_hat0: float = 0.5
    epsilon_driver: float = 0.0002
    epsilon_system: float = 0.00015
    eta0_driver: float = 0.0025
    eta0_system: float = 0.0025
    gamma_driver: float = 1.125
    gamma_system: float = 1.125
    system_samples: int = 5
    driver_samples: int = 2
    max_stages: int | None = None
    discount: str = "eq3"
    n_interactions: int = 100
    n_runs: int = 1000
    seed: int = 0
    out: str = "roster_out"
    belief_noise: float = 0.2
    system_knows_driver_belief: bool = False
    system_driver_samples: int | None = None
    fc_system: str = "optimal"
    ar_system: str = "roster"
    driver_rate_rule: str = "magnitude"
    carry_trust: bool = True
    record_timing: bool = False

    def __post_init__(self):
        if not 0 < self.alpha0 <= 1:
            raise ValueError("alpha0 must be in (0, 1]")
        if not 0 <= self.alpha_hat0 <= 1:
            raise ValueError("alpha_hat0 must be in [0, 1]")
        if self.n_interactions < 1 or self.n_runs < 1:
            raise ValueError("n_interactions and n_runs must be >= 1")
        for name in ("epsilon_driver", "epsilon_system", "eta0_driver", "eta0_system"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.system_strategy.upper() not in ("ROSTER", "TASR", "LLF", "OPTIMAL"):
            raise ValueError(f"unknown system strategy {self.system_strategy!r}")
        if self.driver_strategy.upper() not in ("SAMPLED", "SR", "FC", "AR"):
            raise ValueError(f"unknown driver strategy {self.driver_strategy!r}")
        if self.discount not in ("eq3", "example"):
            raise ValueError(f"unknown discount convention {self.discount!r}")

    @property
    def strategy(self) -> str:
        """Label used in outputs: the system tag for sampled drivers, else the driver tag."""
        d = self.driver_strategy.upper()
        return self.system_strategy.upper() if d == "SAMPLED" else d

    def for_strategy(self, label: str) -> "ExperimentConfig":
        label = label.upper()
        if label in ("ROSTER", "TASR", "LLF"):
            return replace(self, system_strategy=label.lower(), driver_strategy="sampled")
        system = {"FC": self.fc_system, "AR": self.ar_system}.get(label, self.system_strategy)
        return replace(self, system_strategy=system, driver_strategy=label.lower())

    def build_scenario(self) -> ScenarioSpec:
        return build_scenario(self.scenario, self.max_stages, self.seed, self.belief_noise)


@dataclass
class MetricsRecord:
    run: int
    interaction: int
    strategy: str
    alpha0: float
    congestion_h: float
    travel_time_h: float
    stages: int
    alpha: float
    alpha_hat: float
    trust_err: float
    wall_ms: float
    best_case_h: float = math.nan
    selfish_case_h: float = math.nan
    final_route: int = -1


@dataclass
class AgentState:
    """Trust carried between interactions of one run."""

    trust: TrustState
    prediction: TrustPrediction

    @classmethod
    def initial(cls, config: ExperimentConfig) -> "AgentState":
        return cls(
            TrustState.initial(config.alpha0, config.epsilon_driver, config.eta0_driver, config.driver_rate_rule),
            TrustPrediction(config.alpha_hat0, config.epsilon_system, config.eta0_system),
        )


def stream_rng(seed: int, run: int, interaction: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([seed, run, interaction, stream])


def theorem_bounds(truth, flow: np.ndarray, spec: ScenarioSpec, selfish: int) -> tuple[float, float, float]:
    """Best case, selfish case and all-edges ceiling for one flow state."""
    net = spec.network
    ceiling = 0.0
    for v in kernels.bpr(net.tff, net.cap, flow + 1.0, net.bpr_lambda, net.bpr_beta).tolist():
        ceiling += v
    return float(np.min(truth.with_driver)), float(truth.with_driver[selfish]), ceiling


@dataclass(frozen=True)
class InteractionDraws:
    """Seeded state of one (run, interaction), shared by every strategy on matched seeds."""

    flow: np.ndarray
    driver_flow: np.ndarray
    truth: object
    believed_p: object
    believed_q: object
    selfish: int
    best_case: float
    selfish_case: float
    ceiling: float


def draw_interaction(config: ExperimentConfig, spec: ScenarioSpec, run: int, interaction: int) -> InteractionDraws:
    net, rs = spec.network, spec.route_set
    flows = sample_flows(spec, stream_rng(config.seed, run, interaction, STREAM_FLOWS))
    q = sample_driver_belief(spec, flows, stream_rng(config.seed, run, interaction, STREAM_BELIEF))
    p = Belief.exact(flows)
    truth = route_table(net, rs, flows.flow)
    # the system belief is the true state in every bundled scenario
    believed_p = truth if p.expected_flow is flows.flow else route_table(net, rs, p.expected_flow)
    believed_q = route_table(net, rs, q.expected_flow)
    selfish = selfish_route(believed_q.times)
    best, selfish_case, ceiling = theorem_bounds(truth, flows.flow, spec, selfish)
    return InteractionDraws(flows.flow, q.expected_flow, truth, believed_p, believed_q, selfish, best,
                            selfish_case, ceiling)


def run_interaction(config: ExperimentConfig, spec: ScenarioSpec, state: AgentState, run: int,
                    interaction: int, draws: InteractionDraws | None = None) -> tuple[MetricsRecord, AgentState]:
    """Play one interaction and return its metrics plus the trust to carry forward."""
    if draws is None:
        draws = draw_interaction(config, spec, run, interaction)
    n, m_star = spec.route_set.n_routes, spec.max_stages
    truth, believed_p, believed_q = draws.truth, draws.believed_p, draws.believed_q
    costs = CostParams(config.gamma_driver, config.gamma_system)
    driver_kind = StrategyKind(config.driver_strategy.upper())
    system_name = config.system_strategy.upper()

    trust = state.trust.next_interaction() if config.carry_trust else AgentState.initial(config).trust
    prediction = state.prediction if config.carry_trust else AgentState.initial(config).prediction
    driver = DriverAgent(believed_q.times, trust, config.driver_samples, costs, config.discount)
    system = SystemAgent(
        believed_p.times,
        believed_p.with_driver,
        believed_q.times if config.system_knows_driver_belief else believed_p.times,
        prediction,
        config.system_samples,
        config.system_driver_samples or config.driver_samples,
        costs,
        config.discount,
    )
    d_stream = UniformStream(stream_rng(config.seed, run, interaction, STREAM_DRIVER))
    s_stream = UniformStream(stream_rng(config.seed, run, interaction, STREAM_SYSTEM))
    selfish = draws.selfish

    history = History(n, m_star)
    elapsed = 0.0
    if driver_kind is StrategyKind.SR:
        t0 = time.perf_counter()
        final = selfish
        elapsed += time.perf_counter() - t0
        stages = 1
    else:
        while not history.is_terminal:
            stage = history.stage
            t0 = time.perf_counter()
            choice = None
            if system_name == "ROSTER":
                choice = roster_recommend(system, history, s_stream)
                rec = choice.recommendation
            elif system_name == "OPTIMAL":
                rec = optimal_recommend(history.available_routes, system.congestion, system.advertised)
            else:
                rec = baseline_recommend(StrategyKind(system_name), history.available_routes, system.advertised)
            decision = None
            if driver_kind is StrategyKind.SAMPLED:
                decision = decide(driver, history, rec, d_stream)
                action = decision.action
            else:
                action = baseline_select(driver_kind, driver.expected_times, history, rec)
            elapsed += time.perf_counter() - t0
            accepted = action == rec.route_index
            last = stage == m_star
            if decision is not None:
                realized = float(truth.times[rec.route_index]) if last else None
                regret = driver_regret(stage, m_star, accepted, rec.advertised_time, decision.mu,
                                       decision.blended, realized)
                driver.trust = update_trust(driver.trust.with_acceptance(accepted), stage, regret)
            if choice is not None:
                taken = float(truth.times[action]) if last and action != REJECT else None
                b_hat = predicted_driver_regret(stage, m_star, rec.route_index, action, choice.prediction.mu_hat,
                                                rec.advertised_time, choice.prediction.blend, taken)
                system.trust = update_trust_prediction(system.trust, b_hat)
            history = history.advance(rec, action)
        final = history.final_route
        stages = len(history.stages)

    congestion = float(truth.with_driver[final])
    best, selfish_case, ceiling = draws.best_case, draws.selfish_case, draws.ceiling
    tol = BOUND_RTOL * ceiling
    if not best - tol <= congestion <= ceiling + tol:
        raise InvariantViolation(
            f"run {run} interaction {interaction}: congestion {congestion!r} outside [{best!r}, {ceiling!r}]"
        )
    alpha, alpha_hat = float(driver.trust.alpha), float(system.trust.alpha_hat)
    record = MetricsRecord(
        run, interaction, config.strategy, config.alpha0, congestion, float(truth.times[final]), stages,
        alpha, alpha_hat, (alpha_hat - alpha) ** 2, elapsed * 1e3, best, selfish_case, final,
    )
    return record, AgentState(driver.trust, system.trust)


def _run_block(configs: list[ExperimentConfig], runs: range) -> list[MetricsRecord]:
    spec = configs[0].build_scenario()
    out = []
    for run in runs:
        states = [AgentState.initial(c) for c in configs]
        for i in range(configs[0].n_interactions):
            draws = draw_interaction(configs[0], spec, run, i)
            for k, c in enumerate(configs):
                rec, states[k] = run_interaction(c, spec, states[k], run, i, draws)
                out.append(rec)
    return out


def worker_count() -> int:
    cap = os.environ.get("ROSTER_LAB_THREADS")
    n = os.cpu_count() or 1
    if cap:
        n = min(n, max(1, int(cap)))
    return n


_SHARED_FIELDS = ("scenario", "max_stages", "seed", "belief_noise", "n_interactions", "n_runs")


def simulate(configs, workers: int | None = None) -> list[MetricsRecord]:
    """Records for one or more configurations on matched seeds.

    The configurations must agree on scenario, stage count, seed, belief noise
    and run shape; each (run, interaction) state is drawn once and shared.
    """
    if isinstance(configs, ExperimentConfig):
        configs = [configs]
    configs = list(configs)
    head = configs[0]
    for c in configs[1:]:
        if any(getattr(c, f) != getattr(head, f) for f in _SHARED_FIELDS):
            raise ValueError("matched-seed configurations must share scenario, stages, seed, noise and run shape")
    workers = workers or worker_count()
    n_runs = head.n_runs
    if workers <= 1 or n_runs < 2:
        records = _run_block(configs, range(n_runs))
    else:
        chunks = [c for c in np.array_split(np.arange(n_runs), min(workers, n_runs)) if len(c)]
        with ProcessPoolExecutor(len(chunks)) as pool:
            parts = pool.map(_run_block, [configs] * len(chunks), [range(c[0], c[-1] + 1) for c in chunks])
            records = [r for part in parts for r in part]
    order = {(c.alpha0, c.strategy): k for k, c in enumerate(configs)}
    records.sort(key=lambda r: (order[(r.alpha0, r.strategy)], r.run, r.interaction))
    return records


def _mean(values) -> float:
    values = list(values)
    return math.fsum(values) / len(values) if values else math.nan


def summarize(records: list[MetricsRecord], config: ExperimentConfig, spec: ScenarioSpec) -> list[dict]:
    by = defaultdict(list)
    for r in records:
        by[(r.alpha0, r.strategy)].append(r)
    rows = []
    for (alpha0, strategy), recs in sorted(by.items(), key=lambda kv: (kv[0][0], _strategy_order(kv[0][1]))):
        fc = by.get((alpha0, "FC"))
        sr = by.get((alpha0, "SR"))
        cong = _mean(r.congestion_h for r in recs)
        tt = _mean(r.travel_time_h for r in recs)
        last = max(r.interaction for r in recs)
        rows.append({
            "scenario": spec.name,
            "stages": spec.max_stages,
            "alpha0": alpha0,
            "strategy": strategy,
            "runs": len({r.run for r in recs}),
            "interactions": last + 1,
            "mean_congestion_h": cong,
            "mean_travel_time_h": tt,
            "congestion_ratio": cong / _mean(r.congestion_h for r in fc) if fc else math.nan,
            "travel_time_ratio": tt / _mean(r.travel_time_h for r in sr) if sr else math.nan,
            "mean_stages": _mean(r.stages for r in recs),
            "mean_wall_ms": _mean(r.wall_ms for r in recs) if config.record_timing else math.nan,
            "final_trust_err": _mean(r.trust_err for r in recs if r.interaction == last),
        })
    return rows


def _strategy_order(label: str) -> int:
    return COMPARE_STRATEGIES.index(label) if label in COMPARE_STRATEGIES else len(COMPARE_STRATEGIES)


def trust_error_series(records: list[MetricsRecord]) -> dict:
    """Mean squared trust error per interaction index, keyed by (alpha0, strategy)."""
    acc = defaultdict(lambda: defaultdict(list))
    for r in records:
        acc[(r.alpha0, r.strategy)][r.interaction].append(r.trust_err)
    return {k: [_mean(v[i]) for i in sorted(v)] for k, v in acc.items()}


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: list
    summary: list
    trust_error: dict


def run_experiment(config: ExperimentConfig, strategies=None, alphas=None,
                   workers: int | None = None) -> ExperimentResult:
    """Run strategies on matched seeds; FC and SR are always included for the ratios."""
    strategies = [s.upper() for s in (strategies or [config.strategy])]
    for base in ("FC", "SR"):
        if base not in strategies:
            strategies.append(base)
    alphas = list(alphas) if alphas else [config.alpha0]
    spec = config.build_scenario()
    configs = [replace(config.for_strategy(label), alpha0=a)
               for a in alphas for label in sorted(strategies, key=_strategy_order)]
    log.info("simulating %d configurations x %d runs x %d interactions", len(configs), config.n_runs,
             config.n_interactions)
    records = simulate(configs, workers)
    records.sort(key=lambda r: (r.alpha0, _strategy_order(r.strategy), r.run, r.interaction))
    return ExperimentResult(config, records, summarize(records, config, spec), trust_error_series(records))


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_records(records, path, record_timing: bool = False):
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(RECORD_FIELDS)
            for r in records:
                row = asdict(r)
                if not record_timing:
                    row["wall_ms"] = ""
                w.writerow([_fmt(row[f]) for f in RECORD_FIELDS])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def read_records(path) -> list[MetricsRecord]:
    out = []
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(MetricsRecord(
                int(row["run"]), int(row["interaction"]), row["strategy"], float(row["alpha0"]),
                float(row["congestion_h"]), float(row["travel_time_h"]), int(row["stages"]),
                float(row["alpha"]), float(row["alpha_hat"]), float(row["trust_err"]),
                float(row["wall_ms"]) if row["wall_ms"] else math.nan,
            ))
    return out


def write_summary(summary, path):
    """Untimed summaries leave ``mean_wall_ms`` blank so reruns are byte-identical."""
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SUMMARY_FIELDS)
            for row in summary:
                w.writerow(["" if f == "mean_wall_ms" and math.isnan(row[f]) else _fmt(row[f])
                            for f in SUMMARY_FIELDS])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def emit_outputs(result: ExperimentResult, out_dir) -> list[Path]:
    from roster_lab import charts

    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out_dir}: {exc.strerror}") from exc
    files = [out_dir / "records.csv", out_dir / "summary.csv"]
    write_records(result.records, files[0], result.config.record_timing)
    write_summary(result.summary, files[1])
    files += charts.write_charts(result.summary, result.trust_error, out_dir)
    return files


def config_fields() -> dict:
    return {f.name: f for f in fields(ExperimentConfig)}
