"""Scenario files: one JSON document describing a complete, seeded experiment."""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from tsloc.channel import SPEED_OF_LIGHT, ChannelParams, ErrorModel
from tsloc.clocks import ClockParams, ClockRealization, SlowErrorParams, sample_clock
from tsloc.errors import InvalidParams, LocalizationError, ScenarioError, SigmaForBlindNode
from tsloc.estimate.refine import EstimatorConfig
from tsloc.scene import NodeRole, Scene, build_scene
from tsloc.seeding import Seeder
from tsloc.simulate import JitteredPeriodic, Poisson, full_reach

SCHEMA_VERSION = 1

SCHEMA_HELP = """\
Scenario file (JSON), schema_version 1:
  name            free text
  scene           {"nodes": [{"id", "role", "coords", "capability"?}], "nlos_links": [[a, b], ...]}
                  roles: FixedTransmitOnly FixedReceiveOnly FixedTransceiver MobileGnss Blind
                  capability (MobileGnss/Blind only): "transceiver" (default) | "receive_only"
  clocks          {"default": CLOCK, "overrides": {node_id: CLOCK}}
                  CLOCK: {"bias_s", "drift_ppm"  (number or {"uniform": [lo, hi]}),
                          "slow_error": {"model": "off"} | {"model": "gauss_markov", "sigma_s", "tau_s"},
                          "noise_sigma_s", "noise_model": "gaussian"|"uniform"|"truncate", "tick_s"}
  channel         {"multipath": {"model": "off"|"uniform"|"exponential", "max_m"|"mean_m"},
                   "nlos_bias": {"model": "off"|"exponential"|"fixed", "mean_m"|"bias_m"},
                   "frozen_multipath": bool, "c": m/s}
  schedule        {"model": "poisson", "rate_hz"} | {"model": "jittered_periodic", "period_s", "jitter_frac"}
  horizon_s       transmission horizon per trial
  reach           "all" | {"include": [[tx, rx], ...]} | {"exclude": [[tx, rx], ...]}
  gnss_sigma_m    {node_id: meters} for MobileGnss nodes ("default_gnss_sigma_m" fills the rest)
  estimator       {"scheme": "DoubleDifference"|"SamePacket"|"SameReceiver", "refinement": "joint"|"sequential",
                   "pairing_window_s", "drift_compensation", "outlier_rejection", "outlier_threshold",
                   "outlier_floor_m", "max_iterations", "tolerance_m", "order"}
  trials          Monte Carlo trial count
  seed            master seed
"""

_TOP_LEVEL = {
    "schema_version", "name", "description", "scene", "clocks", "channel", "schedule", "horizon_s",
    "reach", "gnss_sigma_m", "default_gnss_sigma_m", "estimator", "trials", "seed",
}


def _value(spec, rng: np.random.Generator, what: str) -> float:
    if isinstance(spec, (int, float)):
        return float(spec)
    if isinstance(spec, Mapping) and set(spec) == {"uniform"}:
        lo, hi = spec["uniform"]
        if hi < lo:
            raise ScenarioError(f"{what}: uniform bounds out of order")
        return float(rng.uniform(lo, hi))
    raise ScenarioError(f"{what}: expected a number or {{'uniform': [lo, hi]}}, got {spec!r}")


@dataclass(frozen=True)
class ClockSpec:
    """Clock parameters, possibly with per-trial random bias and drift."""

    bias_s: Any = 0.0
    drift_ppm: Any = 0.0
    slow_error: SlowErrorParams = field(default_factory=SlowErrorParams)
    noise_sigma_s: float = 0.0
    noise_model: str = "gaussian"
    tick_s: float = 0.0

    @classmethod
    def from_dict(cls, d: Mapping, base: "ClockSpec | None" = None) -> "ClockSpec":
        allowed = {"bias_s", "drift_ppm", "slow_error", "noise_sigma_s", "noise_model", "tick_s"}
        if set(d) - allowed:
            raise ScenarioError(f"unknown clock settings {sorted(set(d) - allowed)}")
        base = base or cls()
        slow = base.slow_error
        if "slow_error" in d:
            se = d["slow_error"]
            model = se.get("model", "off")
            slow = SlowErrorParams(model, float(se.get("sigma_s", 0.0)), float(se.get("tau_s", 1.0)))
        spec = cls(
            bias_s=d.get("bias_s", base.bias_s),
            drift_ppm=d.get("drift_ppm", base.drift_ppm),
            slow_error=slow,
            noise_sigma_s=float(d.get("noise_sigma_s", base.noise_sigma_s)),
            noise_model=str(d.get("noise_model", base.noise_model)),
            tick_s=float(d.get("tick_s", base.tick_s)),
        )
        # validate the static parts once with a throwaway draw
        spec.resolve(np.random.default_rng(0)).validate()
        return spec

    def resolve(self, rng: np.random.Generator) -> ClockParams:
        return ClockParams.from_ppm(
            bias_a=_value(self.bias_s, rng, "bias_s"),
            drift_ppm=_value(self.drift_ppm, rng, "drift_ppm"),
            h_process=self.slow_error,
            noise_sigma_w=self.noise_sigma_s,
            noise_model=self.noise_model,
            tick=self.tick_s,
        )


def _error_model(d: Mapping | None, what: str) -> ErrorModel:
    if not d:
        return ErrorModel()
    kind = d.get("model", "off")
    keys = {"uniform": "max_m", "exponential": "mean_m", "fixed": "bias_m"}
    if kind == "off":
        return ErrorModel()
    if kind not in keys:
        raise ScenarioError(f"{what}: unknown model {kind!r}")
    if keys[kind] not in d:
        raise ScenarioError(f"{what}: model {kind!r} needs {keys[kind]!r}")
    return ErrorModel(kind, float(d[keys[kind]]))


def _schedule_model(d: Mapping):
    kind = d.get("model")
    try:
        if kind == "poisson":
            model = Poisson(float(d["rate_hz"]))
            if not model.rate_hz > 0:
                raise ScenarioError("schedule rate_hz must be > 0")
            return model
        if kind == "jittered_periodic":
            model = JitteredPeriodic(float(d["period_s"]), float(d.get("jitter_frac", 0.0)))
            if not (model.period > 0 and 0 <= model.jitter_frac < 1):
                raise ScenarioError("jittered_periodic needs period_s > 0 and 0 <= jitter_frac < 1")
            return model
    except KeyError as exc:
        raise ScenarioError(f"schedule: missing {exc.args[0]!r}") from None
    raise ScenarioError(f"schedule: unknown model {kind!r}")


@dataclass(frozen=True)
class Scenario:
    name: str
    scene: Scene
    default_clock: ClockSpec
    clock_overrides: Mapping[str, ClockSpec]
    channel: ChannelParams
    schedule_model: Any
    horizon_s: float
    reach: tuple
    gnss_sigma: Mapping[str, float]
    estimator: EstimatorConfig
    trials: int
    seed: int
    document: Mapping = field(default_factory=dict, compare=False, repr=False)

    def clock_spec(self, node: str) -> ClockSpec:
        return self.clock_overrides.get(node, self.default_clock)

    def clocks_for_trial(self, seeder: Seeder) -> dict[str, ClockRealization]:
        clocks = {}
        for node in self.scene.receivers:
            params = self.clock_spec(node).resolve(seeder.rng("clock-params", node))
            clocks[node] = sample_clock(params, seeder.integer_seed("clock", node))
        return clocks

    def with_overrides(self, *, trials: int | None = None, seed: int | None = None) -> "Scenario":
        doc = copy.deepcopy(dict(self.document))
        if trials is not None:
            doc["trials"] = int(trials)
        if seed is not None:
            doc["seed"] = int(seed)
        return parse_scenario(doc)

    @property
    def helper_sigma(self) -> float | None:
        sigmas = [s for s in self.gnss_sigma.values() if s > 0]
        return float(np.mean(sigmas)) if sigmas else None


def parse_scenario(doc: Mapping) -> Scenario:
    """Validate a scenario document; every problem surfaces as ScenarioError."""
    try:
        return _parse(doc)
    except ScenarioError:
        raise
    except LocalizationError as exc:
        raise ScenarioError(str(exc)) from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"malformed scenario: {exc!r}") from exc


def _parse(doc: Mapping) -> Scenario:
    if not isinstance(doc, Mapping):
        raise ScenarioError("scenario must be a JSON object")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ScenarioError(f"schema_version must be {SCHEMA_VERSION}")
    unknown = set(doc) - _TOP_LEVEL
    if unknown:
        raise ScenarioError(f"unknown scenario keys {sorted(unknown)}")
    scene = build_scene(doc["scene"])

    clocks = doc.get("clocks") or {}
    default_clock = ClockSpec.from_dict(clocks.get("default") or {})
    overrides = {}
    for node, spec in (clocks.get("overrides") or {}).items():
        scene.node(node)
        overrides[node] = ClockSpec.from_dict(spec, default_clock)

    ch = doc.get("channel") or {}
    channel = ChannelParams(
        multipath=_error_model(ch.get("multipath"), "multipath"),
        nlos_bias=_error_model(ch.get("nlos_bias"), "nlos_bias"),
        c=float(ch.get("c", SPEED_OF_LIGHT)),
        frozen_multipath=bool(ch.get("frozen_multipath", False)),
    )
    try:
        channel.validate()
    except InvalidParams as exc:
        raise ScenarioError(str(exc)) from None

    schedule_model = _schedule_model(doc.get("schedule") or {})
    horizon = float(doc.get("horizon_s", 0))
    if not horizon > 0:
        raise ScenarioError("horizon_s must be > 0")
    if not scene.transmitters:
        raise ScenarioError("scene has no transmitting node")

    reach_doc = doc.get("reach", "all")
    allowed = set(full_reach(scene))
    if reach_doc in (None, "all"):
        reach = sorted(allowed)
    elif isinstance(reach_doc, Mapping) and set(reach_doc) <= {"include", "exclude"} and len(reach_doc) == 1:
        pairs = {(str(a), str(b)) for a, b in next(iter(reach_doc.values()))}
        for tx, rx in pairs:
            scene.node(tx), scene.node(rx)
            if "include" in reach_doc and (tx, rx) not in allowed:
                raise ScenarioError(f"reach pair {tx}->{rx} is not allowed by node roles")
        reach = sorted(pairs) if "include" in reach_doc else sorted(allowed - pairs)
    else:
        raise ScenarioError("reach must be 'all', {'include': [...]} or {'exclude': [...]}")

    gnss = {str(k): float(v) for k, v in (doc.get("gnss_sigma_m") or {}).items()}
    default_sigma = doc.get("default_gnss_sigma_m")
    for node in scene.ids_with_role(NodeRole.MOBILE_GNSS):
        if node not in gnss and default_sigma is not None:
            gnss[node] = float(default_sigma)
    for node, sigma in gnss.items():
        role = scene.role(node)
        if role is NodeRole.BLIND:
            raise SigmaForBlindNode(f"blind node {node!r} cannot have a GNSS sigma")
        if role is not NodeRole.MOBILE_GNSS:
            raise ScenarioError(f"GNSS sigma given for fixed node {node!r}")
        if not sigma >= 0:
            raise ScenarioError(f"GNSS sigma of {node!r} must be >= 0")

    estimator = EstimatorConfig.from_dict(doc.get("estimator"))
    trials = int(doc.get("trials", 1))
    if trials < 1:
        raise ScenarioError("trials must be >= 1")
    return Scenario(
        name=str(doc.get("name", "")),
        scene=scene,
        default_clock=default_clock,
        clock_overrides=overrides,
        channel=channel,
        schedule_model=schedule_model,
        horizon_s=horizon,
        reach=tuple(reach),
        gnss_sigma=gnss,
        estimator=estimator,
        trials=trials,
        seed=int(doc.get("seed", 0)),
        document=copy.deepcopy(dict(doc)),
    )


def load_scenario(source) -> Scenario:
    """Load from a path, a JSON string, or an already-parsed mapping."""
    if isinstance(source, Mapping):
        return parse_scenario(source)
    text = str(source)
    if isinstance(source, Path) or not text.lstrip().startswith("{"):
        try:
            text = Path(source).read_text(encoding="utf-8")
        except OSError as exc:
            raise ScenarioError(f"cannot read scenario {source}: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario is not valid JSON: {exc}") from None
    return parse_scenario(doc)


def bundled_scenario_path(name: str) -> Path:
    """Path of a scenario shipped with the package (``reference``, ``nlos``, ``los``...)."""
    ref = resources.files("tsloc") / "scenarios" / f"{name}.json"
    return Path(str(ref))


def bundled_scenario(name: str = "reference") -> Scenario:
    return load_scenario(bundled_scenario_path(name))
