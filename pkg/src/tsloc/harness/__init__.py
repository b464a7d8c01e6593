"""Scenario files, seeded trial runner, Monte Carlo summaries and the CLI."""
from tsloc.harness.runner import (
    SummaryReport,
    TrialMetrics,
    run_montecarlo,
    run_trial,
    run_trials,
    simulate_trial,
    summarize,
)
from tsloc.harness.scenario import Scenario, bundled_scenario, load_scenario, parse_scenario

__all__ = [
    "Scenario",
    "SummaryReport",
    "TrialMetrics",
    "bundled_scenario",
    "load_scenario",
    "parse_scenario",
    "run_montecarlo",
    "run_trial",
    "run_trials",
    "simulate_trial",
    "summarize",
]
