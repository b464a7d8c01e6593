"""Measurement generation: transmission schedules, reception timestamps, GNSS priors."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

import numpy as np

from tsloc.channel import ChannelParams, propagation_delay, spatial_error
from tsloc.clocks import ClockRealization, local_timestamp
from tsloc.dataset import Dataset, ReceptionRecord
from tsloc.errors import InvalidParams, MissingClock, NoTransmitters, ScenarioError, SigmaForBlindNode
from tsloc.scene import NodeRole, Scene
from tsloc.seeding import link_rng

__all__ = [
    "PacketEvent",
    "Poisson",
    "JitteredPeriodic",
    "Schedule",
    "NoisyPrior",
    "GroundTruth",
    "ReceptionRecord",
    "generate_schedule",
    "generate_receptions",
    "perturb_priors",
    "full_reach",
]


@dataclass(frozen=True)
class PacketEvent:
    tx: str
    m: int
    t_abs: float


@dataclass(frozen=True)
class Poisson:
    rate_hz: float

    def times(self, horizon: float, rng: np.random.Generator) -> np.ndarray:
        if not self.rate_hz > 0:
            raise InvalidParams("Poisson rate must be > 0")
        n = rng.poisson(self.rate_hz * horizon)
        # conditional on the count, Poisson arrivals are uniform order statistics
        return np.sort(rng.uniform(0.0, horizon, size=n))


@dataclass(frozen=True)
class JitteredPeriodic:
    """Packet ``m`` leaves at ``(m + u_m) * period`` with ``u_m ~ U(0, jitter_frac)``."""

    period: float
    jitter_frac: float = 0.0

    def times(self, horizon: float, rng: np.random.Generator) -> np.ndarray:
        if not self.period > 0:
            raise InvalidParams("period must be > 0")
        if not 0 <= self.jitter_frac < 1:
            raise InvalidParams("jitter_frac must lie in [0, 1)")
        n = int(math.ceil(horizon / self.period - 1e-12))
        base = np.arange(n, dtype=float)
        if self.jitter_frac > 0:
            base = base + rng.uniform(0.0, self.jitter_frac, size=n)
        t = base * self.period
        return t[t < horizon]


class Schedule(Mapping):
    """Absolute transmission times per transmitter; index in the array is the packet index."""

    def __init__(self, times: Mapping[str, np.ndarray]):
        self._times = {tx: np.asarray(t, dtype=float) for tx, t in sorted(times.items())}

    def __getitem__(self, tx):
        return self._times[tx]

    def __iter__(self):
        return iter(self._times)

    def __len__(self):
        return len(self._times)

    def events(self) -> Iterator[PacketEvent]:
        for tx, times in self._times.items():
            for m, t in enumerate(times):
                yield PacketEvent(tx, m, float(t))

    @property
    def n_events(self) -> int:
        return sum(t.size for t in self._times.values())


@dataclass(frozen=True)
class NoisyPrior:
    node: str
    pos0: np.ndarray
    sigma0: float

    def __post_init__(self):
        object.__setattr__(self, "pos0", np.asarray(self.pos0, dtype=float))
        if self.sigma0 < 0:
            raise ValueError("sigma0 must be >= 0")

    def to_dict(self) -> dict:
        return {"node": self.node, "pos0": [float(x) for x in self.pos0], "sigma0": float(self.sigma0)}

    @classmethod
    def from_dict(cls, d) -> "NoisyPrior":
        return cls(str(d["node"]), np.asarray(d["pos0"], dtype=float), float(d["sigma0"]))


@dataclass
class GroundTruth:
    """Validation-only side table.  Estimator entry points never receive it."""

    positions: dict = field(default_factory=dict)
    schedule: Schedule | None = None
    # (rx, tx) -> (m, r_abs) arrays
    receptions: dict = field(default_factory=dict)


def full_reach(scene: Scene) -> list[tuple[str, str]]:
    """Every (tx, rx) pair allowed by node capabilities."""
    return [(tx, rx) for tx in scene.transmitters for rx in scene.receivers if tx != rx]


def generate_schedule(scene: Scene, model, horizon: float, rng) -> Schedule:
    """Independent asynchronous event streams over ``[0, horizon)`` for each transmitter."""
    if not horizon > 0:
        raise InvalidParams("horizon must be > 0")
    txs = scene.transmitters
    if not txs:
        raise NoTransmitters("scene has no transmitting node")
    return Schedule({tx: model.times(horizon, link_rng(rng, "schedule", tx)) for tx in txs})


def generate_receptions(
    scene: Scene,
    clocks: Mapping[str, ClockRealization],
    channel: ChannelParams,
    schedule: Schedule,
    reach: Iterable[tuple[str, str]] | None = None,
    rng=None,
    truth: GroundTruth | None = None,
) -> Dataset:
    """Turn transmission events into local reception timestamps.

    ``reach`` lists the (tx, rx) pairs that hear each other (all capable pairs
    when omitted).  ``rng`` is a Generator or a Seeder; a Seeder gives every
    link its own stream.  Without one, channel draws come from a generator
    seeded with 0.
    """
    channel.validate()
    if rng is None:
        rng = np.random.default_rng(0)
    pairs = sorted(set(full_reach(scene) if reach is None else ((str(a), str(b)) for a, b in reach)))
    parts = []
    for tx, rx in pairs:
        if tx == rx:
            continue
        if not scene.node(tx).transmits or not scene.node(rx).receives:
            raise ScenarioError(f"link {tx}->{rx} is not allowed by node roles")
        if tx not in schedule:
            continue
        if rx not in clocks:
            raise MissingClock(f"receiver {rx!r} has no clock realization")
        t = schedule[tx]
        if t.size == 0:
            continue
        flag = scene.link_flag(tx, rx)
        lrng = link_rng(rng, "channel", tx, rx)
        size = 1 if channel.frozen_multipath else t.size
        err = spatial_error(flag, channel, lrng, size=size)
        d = float(np.linalg.norm(scene.position(tx) - scene.position(rx)))
        r = t + propagation_delay(d, channel.c) + err
        s = local_timestamp(clocks[rx], r)
        m = np.arange(t.size, dtype=np.int64)
        parts.append(Dataset(np.full(t.size, rx), np.full(t.size, tx), m, s))
        if truth is not None:
            truth.receptions[(rx, tx)] = (m, r)
    if truth is not None:
        truth.schedule = schedule
        truth.positions.update({i: scene.position(i) for i in scene.ids})
    return Dataset.concat(parts)


def perturb_priors(scene: Scene, gnss_sigma: Mapping[str, float], rng) -> list[NoisyPrior]:
    """Initial positions handed to the estimators.

    Fixed stations are copied exactly, MobileGnss nodes get isotropic Gaussian
    noise of std ``gnss_sigma[node]`` per axis, blind nodes are omitted.
    """
    for node, sigma in gnss_sigma.items():
        role = scene.role(node)
        if role is NodeRole.BLIND:
            raise SigmaForBlindNode(f"blind node {node!r} cannot have a GNSS sigma")
        if role is not NodeRole.MOBILE_GNSS:
            raise ScenarioError(f"GNSS sigma given for fixed node {node!r}")
        if not sigma >= 0:
            raise InvalidParams(f"GNSS sigma for {node!r} must be >= 0")
    priors = []
    for node in scene.ids:
        role = scene.role(node)
        pos = scene.position(node)
        if role.is_fixed:
            priors.append(NoisyPrior(node, pos, 0.0))
        elif role is NodeRole.MOBILE_GNSS:
            sigma = float(gnss_sigma.get(node, 0.0))
            noise = sigma * link_rng(rng, "gnss", node).standard_normal(pos.size)
            priors.append(NoisyPrior(node, pos + noise, sigma))
    return priors
