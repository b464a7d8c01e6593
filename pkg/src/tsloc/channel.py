"""Propagation delay plus multipath and NLOS delay-excess models."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from tsloc.errors import InvalidParams, NegativeDistance
from tsloc.scene import LinkFlag

SPEED_OF_LIGHT = 299_792_458.0

_MULTIPATH_KINDS = ("off", "uniform", "exponential")
_NLOS_KINDS = ("off", "exponential", "fixed")


@dataclass(frozen=True)
class ErrorModel:
    """A non-negative delay excess in meters; ``value`` is the max, mean or fixed size."""

    kind: str = "off"
    value: float = 0.0

    @property
    def enabled(self) -> bool:
        return self.kind != "off"

    def draw_meters(self, rng: np.random.Generator, size=None):
        if self.kind == "off" or (self.kind != "fixed" and self.value == 0):
            return np.zeros(size) if size is not None else 0.0
        if self.kind == "uniform":
            return rng.uniform(0.0, self.value, size=size)
        if self.kind == "exponential":
            return rng.exponential(self.value, size=size)
        if self.kind == "fixed":
            return np.full(size, self.value) if size is not None else self.value
        raise InvalidParams(f"unknown error model {self.kind!r}")


@dataclass(frozen=True)
class ChannelParams:
    multipath: ErrorModel = field(default_factory=ErrorModel)
    nlos_bias: ErrorModel = field(default_factory=ErrorModel)
    c: float = SPEED_OF_LIGHT
    # one multipath draw per link held for the whole trial instead of per event
    frozen_multipath: bool = False

    def validate(self) -> None:
        if self.multipath.kind not in _MULTIPATH_KINDS:
            raise InvalidParams(f"unknown multipath model {self.multipath.kind!r}")
        if self.nlos_bias.kind not in _NLOS_KINDS:
            raise InvalidParams(f"unknown NLOS model {self.nlos_bias.kind!r}")
        for m in (self.multipath, self.nlos_bias):
            if not m.value >= 0:
                raise InvalidParams("error magnitudes must be >= 0")
        if not self.c > 0:
            raise InvalidParams("propagation speed must be > 0")


def propagation_delay(d, c: float = SPEED_OF_LIGHT):
    if np.any(np.asarray(d) < 0):
        raise NegativeDistance(f"negative distance {d!r}")
    if not c > 0:
        raise InvalidParams("propagation speed must be > 0")
    return d / c


def spatial_error(link_flag: LinkFlag, params: ChannelParams, rng: np.random.Generator, size=None):
    """Additive reception-time error (seconds) of one link: multipath, plus NLOS bias on NLOS links."""
    meters = params.multipath.draw_meters(rng, size)
    if LinkFlag(link_flag) is LinkFlag.NLOS:
        meters = meters + params.nlos_bias.draw_meters(rng, size)
    return meters / params.c
