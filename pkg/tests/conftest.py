import numpy as np
import pytest

from tsloc.channel import ChannelParams
from tsloc.clocks import ClockParams, sample_clock
from tsloc.scene import build_scene
from tsloc.seeding import Seeder
from tsloc.simulate import GroundTruth, JitteredPeriodic, generate_receptions, generate_schedule, perturb_priors


def scene_of(nodes, nlos=()):
    """``nodes``: iterable of (id, role, coords[, capability])."""
    recs = []
    for n in nodes:
        rec = {"id": n[0], "role": n[1], "coords": list(n[2])}
        if len(n) > 3:
            rec["capability"] = n[3]
        recs.append(rec)
    return build_scene({"nodes": recs, "nlos_links": [list(p) for p in nlos]})


def simulate(
    scene,
    clock_params=None,
    channel=None,
    schedule_model=None,
    horizon=2.0,
    seed=0,
    gnss_sigma=None,
    reach=None,
):
    """Seeded simulate step; ``clock_params`` maps rx id -> ClockParams (identity by default)."""
    seeder = Seeder(seed)
    clock_params = clock_params or {}
    clocks = {
        rx: sample_clock(clock_params.get(rx, ClockParams()), seeder.integer_seed("clock", rx))
        for rx in scene.receivers
    }
    schedule = generate_schedule(scene, schedule_model or JitteredPeriodic(0.1, 0.5), horizon, seeder)
    truth = GroundTruth()
    ds = generate_receptions(scene, clocks, channel or ChannelParams(), schedule, reach, rng=seeder, truth=truth)
    priors = perturb_priors(scene, gnss_sigma or {}, seeder)
    return ds, priors, truth


def random_clocks(scene, rng, bias=1.0, drift_ppm=0.0, **kwargs):
    return {
        rx: ClockParams.from_ppm(
            bias_a=float(rng.uniform(-bias, bias)),
            drift_ppm=float(rng.uniform(-drift_ppm, drift_ppm)),
            **kwargs,
        )
        for rx in scene.receivers
    }


SQUARE = [
    ("S1", "FixedTransmitOnly", (0.0, 0.0)),
    ("S2", "FixedTransmitOnly", (400.0, 0.0)),
    ("S3", "FixedTransmitOnly", (400.0, 400.0)),
    ("S4", "FixedTransmitOnly", (0.0, 400.0)),
]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
