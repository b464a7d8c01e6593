"""Seeded trial execution and Monte Carlo aggregation."""
from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from tsloc.dataset import Dataset
from tsloc.errors import AllTrialsFailed, LocalizationError
from tsloc.estimate.refine import localize
from tsloc.harness.scenario import Scenario, parse_scenario
from tsloc.scene import NodeRole
from tsloc.seeding import Seeder
from tsloc.simulate import GroundTruth, generate_receptions, generate_schedule, perturb_priors


@dataclass
class SimulationOutput:
    dataset: Dataset
    priors: list
    # validation only; never passed to the estimators
    truth: GroundTruth


def trial_seeder(scenario: Scenario, trial_index: int) -> Seeder:
    return Seeder(scenario.seed, int(trial_index))


def simulate_trial(scenario: Scenario, trial_index: int = 0) -> SimulationOutput:
    seeder = trial_seeder(scenario, trial_index)
    scene = scenario.scene
    clocks = scenario.clocks_for_trial(seeder)
    schedule = generate_schedule(scene, scenario.schedule_model, scenario.horizon_s, seeder)
    truth = GroundTruth()
    dataset = generate_receptions(
        scene, clocks, scenario.channel, schedule, scenario.reach, rng=seeder, truth=truth
    )
    priors = perturb_priors(scene, scenario.gnss_sigma, seeder)
    return SimulationOutput(dataset, priors, truth)


@dataclass
class TrialMetrics:
    trial: int
    failed: bool = False
    error: str | None = None
    message: str | None = None
    position_error: dict = field(default_factory=dict)
    prior_error: dict = field(default_factory=dict)
    excluded: dict = field(default_factory=dict)
    converged: dict = field(default_factory=dict)
    wall_time_s: float = 0.0

    def to_dict(self, include_timing: bool = False) -> dict:
        out = {
            "trial": self.trial,
            "failed": self.failed,
            "error": self.error,
            "message": self.message,
            "position_error_m": dict(sorted(self.position_error.items())),
            "prior_error_m": dict(sorted(self.prior_error.items())),
            "excluded_anchors": dict(sorted(self.excluded.items())),
            "converged": dict(sorted(self.converged.items())),
        }
        if include_timing:
            out["wall_time_s"] = self.wall_time_s
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def run_trial(scenario: Scenario, trial_index: int) -> TrialMetrics:
    """Simulate one seeded trial, estimate, and score against the sealed truth.

    Estimation failures are recorded on the returned metrics instead of raised.
    """
    start = time.perf_counter()
    metrics = TrialMetrics(trial=int(trial_index))
    try:
        sim = simulate_trial(scenario, trial_index)
        truth = sim.truth.positions
        for p in sim.priors:
            if p.sigma0 > 0:
                metrics.prior_error[p.node] = float(np.linalg.norm(p.pos0 - truth[p.node]))
        scene = scenario.scene
        targets = [n for n in scene.ids if not scene.role(n).is_fixed]
        result = localize(sim.dataset, sim.priors, scenario.estimator, targets)
        for node, est in result.estimates.items():
            metrics.position_error[node] = float(np.linalg.norm(est.pos - truth[node]))
            metrics.converged[node] = bool(est.converged)
            if est.excluded_anchors:
                metrics.excluded[node] = list(est.excluded_anchors)
    except LocalizationError as exc:
        metrics.failed = True
        metrics.error = type(exc).__name__
        metrics.message = str(exc)
        metrics.position_error.clear()
        metrics.converged.clear()
        metrics.excluded.clear()
    metrics.wall_time_s = time.perf_counter() - start
    return metrics


def _stats(errors) -> dict:
    e = np.asarray(errors, dtype=float)
    return {
        "n": int(e.size),
        "rmse_m": float(np.sqrt(np.mean(e**2))),
        "median_m": float(np.median(e)),
        "p95_m": float(np.percentile(e, 95)),
    }


@dataclass
class SummaryReport:
    scenario: str
    trials: int
    failed_trials: int
    failures: dict
    nodes: dict
    prior: dict
    gain_ratio: float | None
    blind_rmse_m: float | None
    helper_prior_sigma_m: float | None
    convergence_rate: float
    exclusion_counts: dict

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "trials": self.trials,
            "failed_trials": self.failed_trials,
            "failures": self.failures,
            "nodes": self.nodes,
            "prior": self.prior,
            "gain_ratio": self.gain_ratio,
            "blind_rmse_m": self.blind_rmse_m,
            "helper_prior_sigma_m": self.helper_prior_sigma_m,
            "convergence_rate": self.convergence_rate,
            "exclusion_counts": self.exclusion_counts,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def summarize(scenario: Scenario, trials: list[TrialMetrics]) -> SummaryReport:
    """Aggregate trial metrics; the result does not depend on trial order."""
    trials = sorted(trials, key=lambda t: t.trial)
    ok = [t for t in trials if not t.failed]
    if not ok:
        kinds = sorted({t.error for t in trials})
        raise AllTrialsFailed(f"all {len(trials)} trials failed ({', '.join(kinds)})")
    failures: dict[str, int] = {}
    for t in trials:
        if t.failed:
            failures[t.error] = failures.get(t.error, 0) + 1

    per_node: dict[str, list] = {}
    per_prior: dict[str, list] = {}
    exclusions: dict[str, dict] = {}
    conv = []
    for t in ok:
        for node, e in t.position_error.items():
            per_node.setdefault(node, []).append(e)
        for node, e in t.prior_error.items():
            per_prior.setdefault(node, []).append(e)
        for node, anchors in t.excluded.items():
            for a in anchors:
                exclusions.setdefault(node, {}).setdefault(a, 0)
                exclusions[node][a] += 1
        conv.extend(t.converged.values())

    scene = scenario.scene
    blind = [n for n in scene.ids_with_role(NodeRole.BLIND) if n in per_node]
    blind_errors = [e for n in blind for e in per_node[n]]
    blind_rmse = float(np.sqrt(np.mean(np.square(blind_errors)))) if blind_errors else None
    sigma = scenario.helper_sigma
    gain = blind_rmse / sigma if (blind_rmse is not None and sigma) else None
    return SummaryReport(
        scenario=scenario.name,
        trials=len(trials),
        failed_trials=len(trials) - len(ok),
        failures=dict(sorted(failures.items())),
        nodes={n: {"role": scene.role(n).value, **_stats(v)} for n, v in sorted(per_node.items())},
        prior={n: _stats(v) for n, v in sorted(per_prior.items())},
        gain_ratio=gain,
        blind_rmse_m=blind_rmse,
        helper_prior_sigma_m=sigma,
        convergence_rate=float(np.mean(conv)) if conv else 0.0,
        exclusion_counts={n: dict(sorted(d.items())) for n, d in sorted(exclusions.items())},
    )


_worker_scenario: Scenario | None = None


def _init_worker(document) -> None:
    # the parsed scene holds read-only mappings that do not pickle; workers
    # rebuild the scenario from its document instead
    global _worker_scenario
    _worker_scenario = parse_scenario(document)


def _run_in_worker(index: int) -> TrialMetrics:
    return run_trial(_worker_scenario, index)


def run_trials(scenario: Scenario, trials: int | None = None, concurrency: int = 1) -> list[TrialMetrics]:
    """Run trials ``0 .. n-1``; results come back in trial order whatever ``concurrency``."""
    n = scenario.trials if trials is None else int(trials)
    if concurrency and concurrency > 1:
        with ProcessPoolExecutor(
            max_workers=concurrency, initializer=_init_worker, initargs=(dict(scenario.document),)
        ) as pool:
            return list(pool.map(_run_in_worker, range(n), chunksize=max(1, n // (4 * concurrency))))
    return [run_trial(scenario, i) for i in range(n)]


def run_montecarlo(scenario: Scenario, concurrency: int = 1) -> SummaryReport:
    return summarize(scenario, run_trials(scenario, concurrency=concurrency))
