import copy
import json

import numpy as np
import pytest

from tsloc.errors import AllTrialsFailed, ScenarioError, SigmaForBlindNode
from tsloc.harness.runner import run_trial, run_trials, simulate_trial, summarize
from tsloc.harness.scenario import bundled_scenario, bundled_scenario_path, load_scenario, parse_scenario


def doc(name="los"):
    return json.loads(bundled_scenario_path(name).read_text())


def quiet(d):
    # noise-free clocks with small biases: exact up to float resolution
    d = copy.deepcopy(d)
    d["clocks"] = {"default": {"bias_s": {"uniform": [-1e-3, 1e-3]}, "drift_ppm": 0}}
    d["horizon_s"] = 0.5
    d["schedule"] = {"model": "jittered_periodic", "period_s": 0.01, "jitter_frac": 0.5}
    return d


def test_bundled_scenarios_parse():
    for name in ("reference", "nlos", "los"):
        s = bundled_scenario(name)
        assert s.trials >= 1
        assert "B" in s.scene.ids


def test_noise_free_trial_is_exact():
    m = run_trial(parse_scenario(quiet(doc("los"))), 0)
    assert not m.failed
    assert m.position_error["B"] < 1e-6


def test_trial_is_deterministic():
    s = bundled_scenario("reference")
    a, b = simulate_trial(s, 3), simulate_trial(s, 3)
    assert a.dataset == b.dataset
    assert run_trial(s, 3).to_json() == run_trial(s, 3).to_json()
    assert simulate_trial(s, 4).dataset != a.dataset


def test_seed_changes_outcome():
    s = bundled_scenario("reference")
    assert simulate_trial(s.with_overrides(seed=1), 0).dataset != simulate_trial(s, 0).dataset


def disconnected():
    d = doc("los")
    d["reach"] = {"exclude": [[t, "B"] for t in ("S1", "S2", "S3", "S4")]}
    d["trials"] = 3
    return parse_scenario(d)


def test_disconnected_blind_node_recorded_as_failure():
    trials = run_trials(disconnected())
    assert len(trials) == 3
    assert all(t.failed and t.error == "UnlocatableNode" for t in trials)
    with pytest.raises(AllTrialsFailed):
        summarize(disconnected(), trials)


def test_summary_counts_failures_and_continues():
    s = bundled_scenario("los").with_overrides(trials=4)
    good = run_trials(s)
    bad = run_trial(disconnected(), 0)
    bad.trial = 99
    rep = summarize(s, good + [bad])
    assert rep.trials == 5
    assert rep.failed_trials == 1
    assert rep.failures == {"UnlocatableNode": 1}
    assert rep.nodes["B"]["n"] == 4


def test_summary_independent_of_order_and_concurrency():
    s = bundled_scenario("reference").with_overrides(trials=8)
    serial = run_trials(s)
    parallel = run_trials(s, concurrency=2)
    assert [t.to_json() for t in serial] == [t.to_json() for t in parallel]
    assert summarize(s, serial).to_json() == summarize(s, serial[::-1]).to_json()


def test_summary_statistics_and_gain():
    s = bundled_scenario("reference").with_overrides(trials=10)
    trials = run_trials(s)
    rep = summarize(s, trials)
    errs = np.array([t.position_error["B"] for t in trials])
    assert rep.blind_rmse_m == pytest.approx(np.sqrt(np.mean(errs**2)))
    assert rep.nodes["B"]["median_m"] == pytest.approx(np.median(errs))
    assert rep.helper_prior_sigma_m == 5.0
    assert rep.gain_ratio == pytest.approx(rep.blind_rmse_m / 5.0)
    assert set(rep.prior) == {"H1", "H2", "H3", "H4", "H5"}


@pytest.mark.parametrize(
    "mutate",
    [
        lambda d: d.pop("schema_version"),
        lambda d: d.update(horizon_s=0),
        lambda d: d.update(trials=0),
        lambda d: d.update(bogus=1),
        lambda d: d["scene"]["nodes"].append(dict(d["scene"]["nodes"][0])),
        lambda d: d.update(reach={"include": [["S1", "S2"]]}),
        lambda d: d.update(estimator={"refinement": "batch"}),
        lambda d: d["scene"]["nodes"][0].update(coords=[0, 0, 0]),
    ],
)
def test_malformed_scenarios_rejected(mutate):
    d = doc("reference")
    mutate(d)
    with pytest.raises(ScenarioError):
        parse_scenario(d)


def test_sigma_for_blind_node_rejected():
    d = doc("reference")
    d["gnss_sigma_m"] = {"B": 3.0}
    with pytest.raises(SigmaForBlindNode):
        parse_scenario(d)


def test_load_scenario_sources(tmp_path):
    path = bundled_scenario_path("los")
    a = load_scenario(path)
    b = load_scenario(path.read_text())
    c = load_scenario(json.loads(path.read_text()))
    assert a == b == c
    with pytest.raises(ScenarioError):
        load_scenario(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ScenarioError):
        load_scenario(bad)
