"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""
import copy
import itertools
import json
import time

import numpy as np
import pytest
from scipy.spatial import Delaunay

from tsloc.channel import SPEED_OF_LIGHT as C
from tsloc.clocks import ClockParams
from tsloc.dataset import ReceptionRecord
from tsloc.estimate.differencing import diff_same_packet, diff_same_receiver, dtdoa, paired_double_differences
from tsloc.estimate.drift import compensate_drift
from tsloc.estimate.ils import ils_solve
from tsloc.estimate.pseudoranges import extract_pseudoranges
from tsloc.estimate.refine import EstimatorConfig, localize
from tsloc.harness.cli import main
from tsloc.harness.runner import run_trials, simulate_trial, summarize
from tsloc.harness.scenario import bundled_scenario, bundled_scenario_path, parse_scenario
from tsloc.simulate import NoisyPrior

from conftest import SQUARE, scene_of, simulate


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\nCRITERION {n}: {'PASS' if ok else 'FAIL'} {detail}")
        return ok

    return emit


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


def test_criterion_1_differencing_oracles(report):
    rng = np.random.default_rng(1)
    worst = 0.0
    with Timer() as t:
        for _ in range(1000):
            pos = {n: rng.uniform(-500, 500, 2) for n in "ijkl"}
            a = {"k": rng.uniform(-10, 10), "l": rng.uniform(-10, 10)}
            tx = {"i": rng.uniform(0, 10), "j": rng.uniform(0, 10)}
            d = {(x, r): float(np.linalg.norm(pos[x] - pos[r])) for x in "ij" for r in "kl"}
            rec = {(x, r): ReceptionRecord(r, x, 0, a[r] + tx[x] + v / C) for (x, r), v in d.items()}
            errs = [
                diff_same_receiver(rec["i", "k"], rec["j", "k"]).value
                - ((tx["j"] - tx["i"]) + (d["j", "k"] - d["i", "k"]) / C),
                diff_same_packet(rec["i", "k"], rec["i", "l"]).value
                - ((a["k"] - a["l"]) + (d["i", "k"] - d["i", "l"]) / C),
                dtdoa(rec["i", "k"], rec["j", "k"], rec["i", "l"], rec["j", "l"]).value
                - (d["j", "k"] - d["i", "k"] - d["j", "l"] + d["i", "l"]) / C,
            ]
            worst = max(worst, max(abs(e) for e in errs))
    ok = worst < 1e-12 and t.elapsed < 5
    assert report(1, ok, f"max oracle error {worst:.2e} s over 1000 draws, {t.elapsed:.2f} s")


def test_criterion_2_bias_shift_invariance(report):
    sim = simulate_trial(bundled_scenario("los"), 0)
    priors = [p for p in sim.priors]
    with Timer() as t:
        prs = extract_pseudoranges(compensate_drift(sim.dataset)[0], priors, "B")
        positions = {p.node: p.pos0 for p in priors}
        a = ils_solve(prs, positions)
        b = ils_solve(prs.shifted(1000.0), positions)
    moved = float(np.linalg.norm(a.pos - b.pos))
    dbias = b.common_bias - a.common_bias
    ok = moved < 1e-9 and abs(dbias - 1000.0) < 1e-6 and t.elapsed < 1
    assert report(2, ok, f"position moved {moved:.2e} m, bias shift {dbias:.9f} m, {t.elapsed:.3f} s")


def random_scene(rng):
    while True:
        n = int(rng.integers(5, 9))
        anchors = rng.uniform(0, 500, size=(n, 2))
        target = rng.uniform(0, 500, size=2)
        if Delaunay(anchors).find_simplex(target) >= 0:
            break
    nodes = [(f"S{i}", "FixedTransmitOnly", p) for i, p in enumerate(anchors)]
    nodes += [(f"R{i}", "FixedReceiveOnly", rng.uniform(0, 500, 2)) for i in range(2)]
    nodes.append(("B", "Blind", target, "receive_only"))
    return scene_of(nodes)


def test_criterion_3_random_scenes_zero_noise(report):
    rng = np.random.default_rng(3)
    worst_err, worst_it = 0.0, 0
    with Timer() as t:
        for k in range(100):
            scene = random_scene(rng)
            clocks = {rx: ClockParams(bias_a=float(rng.uniform(-1, 1))) for rx in scene.receivers}
            ds, priors, truth = simulate(scene, clocks, horizon=1.0, seed=k)
            # sequential refinement reports the iterations of the ILS solve
            # started from the anchor centroid
            est = localize(ds, priors, EstimatorConfig(refinement="sequential")).estimates["B"]
            worst_err = max(worst_err, float(np.linalg.norm(est.pos - truth.positions["B"])))
            worst_it = max(worst_it, est.iterations)
    ok = worst_err < 1e-6 and worst_it <= 15 and t.elapsed < 10
    assert report(3, ok, f"max error {worst_err:.2e} m, max ILS iterations {worst_it}, {t.elapsed:.2f} s")


RECEIVERS = [("H1", (80, 120)), ("H2", (300, 60)), ("H3", (330, 310)), ("H4", (120, 330)), ("H5", (200, 260)), ("B", (220, 170))]


def test_criterion_4_drift_compensation(report):
    # reference-scenario geometry, every receiver drifting within +-50 ppm
    scene = scene_of(SQUARE + [(n, "FixedReceiveOnly", p) for n, p in RECEIVERS])
    pos = {n: scene.position(n) for n in scene.ids}
    dist = lambda a, b: float(np.linalg.norm(pos[a] - pos[b]))  # noqa: E731
    worst = 0.0
    with Timer() as t:
        for seed in range(20):
            rng = np.random.default_rng(seed)
            clocks = {
                n: ClockParams.from_ppm(bias_a=float(rng.uniform(-1, 1)), drift_ppm=float(rng.uniform(-50, 50)))
                for n, _ in RECEIVERS
            }
            ds, _, _ = simulate(scene, clocks, horizon=20.0, seed=seed)
            corrected, _ = compensate_drift(ds)
            for x, y in itertools.combinations([n for n, _ in RECEIVERS], 2):
                for i, j in itertools.combinations(["S1", "S2", "S3", "S4"], 2):
                    dd = paired_double_differences(corrected, i, j, x, y, window=0.1)
                    oracle = (dist(j, x) - dist(i, x) - dist(j, y) + dist(i, y)) / C
                    worst = max(worst, float(np.max(np.abs(dd - oracle))))
    ok = worst < 1e-10 and t.elapsed < 5
    assert report(4, ok, f"max post-correction DTDoA error {worst:.3e} s over 20 draws, {t.elapsed:.2f} s")


def test_criterion_5_reference_accuracy_gain(report):
    scenario = bundled_scenario("reference")
    with Timer() as t:
        summary = summarize(scenario, run_trials(scenario))
    rmse = summary.blind_rmse_m
    ok = summary.trials == 500 and rmse < 5.0 and t.elapsed < 60
    assert report(
        5, ok, f"blind RMSE {rmse:.3f} m over {summary.trials} trials (gain ratio {summary.gain_ratio:.3f}), {t.elapsed:.1f} s"
    )


def test_criterion_6_los_median(report):
    scenario = bundled_scenario("los")
    with Timer() as t:
        summary = summarize(scenario, run_trials(scenario))
    median = summary.nodes["B"]["median_m"]
    packets = scenario.horizon_s / scenario.schedule_model.period
    ok = summary.trials == 200 and packets >= 300 and median < 1.0 and t.elapsed < 30
    assert report(6, ok, f"blind median {median:.3f} m over {summary.trials} trials, {t.elapsed:.1f} s")


def test_criterion_7_nlos_exclusion(report):
    nlos = bundled_scenario("nlos")
    doc = copy.deepcopy(dict(nlos.document))
    doc["scene"]["nlos_links"] = []
    clean = parse_scenario(doc)
    with Timer() as t:
        trials = run_trials(nlos)
        summary = summarize(nlos, trials)
        los_summary = summarize(clean, run_trials(clean))
    pair, = nlos.scene.nlos_links
    rx = next(n for n in pair if not nlos.scene.role(n).is_fixed)
    tx = next(n for n in pair if n != rx)
    hits = sum(tx in t_.excluded.get(rx, []) for t_ in trials if not t_.failed)
    rate = hits / len(trials)
    ratio = summary.blind_rmse_m / los_summary.blind_rmse_m
    ok = len(trials) == 200 and rate >= 0.95 and ratio <= 2.0 and t.elapsed < 30
    assert report(
        7, ok,
        f"{tx}->{rx} excluded in {rate:.1%} of {len(trials)} trials, RMSE {summary.blind_rmse_m:.3f} m "
        f"vs all-LOS {los_summary.blind_rmse_m:.3f} m (x{ratio:.2f}), {t.elapsed:.1f} s",
    )


def test_criterion_8_sqrt_n_scaling(report):
    # exact anchors, white timestamp noise only; N packets per station
    scene = bundled_scenario("los").scene
    priors = [NoisyPrior(n, scene.position(n), 0.0) for n in scene.ids if n != "B"]
    b = scene.position("B")
    clocks = {rx: ClockParams(noise_sigma_w=1e-8) for rx in scene.receivers}
    std = {}
    with Timer() as t:
        for n in (10, 100, 1000):
            errs = []
            for trial in range(300):
                ds, _, _ = simulate(scene, clocks, horizon=n * 0.1, seed=10_000 * n + trial)
                prs = extract_pseudoranges(ds, priors, "B")
                true = {e.anchor: float(np.linalg.norm(scene.position(e.anchor) - b)) for e in prs.entries}
                others = [e for e in prs.entries if e.anchor != prs.reference]
                ref = next(e for e in prs.entries if e.anchor == prs.reference)
                e = others[0]
                errs.append((e.pseudo_range - ref.pseudo_range) - (true[e.anchor] - true[ref.anchor]))
            std[n] = float(np.std(errs, ddof=1))
    r1 = std[10] / std[100] / np.sqrt(10)
    r2 = std[100] / std[1000] / np.sqrt(10)
    ok = abs(r1 - 1) <= 0.2 and abs(r2 - 1) <= 0.2 and t.elapsed < 30
    detail = ", ".join(f"N={n}: {s * 100:.2f} cm" for n, s in std.items())
    assert report(8, ok, f"{detail}; normalized ratios {r1:.3f}, {r2:.3f}, {t.elapsed:.1f} s")


def test_criterion_9_montecarlo_determinism(report, tmp_path, capsys):
    outs = [tmp_path / f"run{i}.json" for i in range(3)]
    args = ["montecarlo", "--scenario", str(bundled_scenario_path("reference")), "--trials", "100", "--seed", "11"]
    codes = [
        main(args + ["--out", str(outs[0])]),
        main(args + ["--out", str(outs[1])]),
        main(args + ["--out", str(outs[2]), "--concurrency", "2"]),
    ]
    capsys.readouterr()
    data = [p.read_bytes() for p in outs]
    ok = codes == [0, 0, 0] and data[0] == data[1] == data[2]
    digest = json.loads(data[0])["blind_rmse_m"]
    assert report(9, ok, f"three runs (one with 2 workers) byte-identical: {data[0] == data[1] == data[2]}, blind RMSE {digest:.4f} m")
