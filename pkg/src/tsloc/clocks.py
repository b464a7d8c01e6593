"""Receiver clock model.

A local timestamp is ``a + (1 + b) * r + h(r) + w`` where ``a`` is the clock
bias, ``b`` the fractional drift, ``h`` a slowly varying correlated error and
``w`` an independent per-event error.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from tsloc.errors import InvalidParams

PPM = 1e-6

NOISE_MODELS = ("gaussian", "uniform", "truncate")

# grid samples generated per lazy extension of the slow error path
_CHUNK = 4096


@dataclass(frozen=True)
class SlowErrorParams:
    """``model`` is ``"off"`` or ``"gauss_markov"`` (stationary std ``sigma``, correlation time ``tau_corr``)."""

    model: str = "off"
    sigma: float = 0.0
    tau_corr: float = 1.0

    def validate(self) -> None:
        if self.model not in ("off", "gauss_markov"):
            raise InvalidParams(f"unknown slow error model {self.model!r}")
        if self.model == "gauss_markov":
            if not self.sigma >= 0:
                raise InvalidParams("slow error sigma must be >= 0")
            if not self.tau_corr > 0:
                raise InvalidParams("slow error tau_corr must be > 0")

    @property
    def enabled(self) -> bool:
        return self.model == "gauss_markov" and self.sigma > 0


@dataclass(frozen=True)
class ClockParams:
    """Per-receiver clock parameters.

    ``noise_model`` selects the per-event error: ``"gaussian"`` draws
    N(0, noise_sigma_w**2); ``"uniform"`` draws U(-tick/2, tick/2);
    ``"truncate"`` adds the gaussian term and then floors the timestamp onto
    the ``tick`` grid.
    """

    bias_a: float = 0.0
    drift_b: float = 0.0
    h_process: SlowErrorParams = field(default_factory=SlowErrorParams)
    noise_sigma_w: float = 0.0
    noise_model: str = "gaussian"
    tick: float = 0.0

    @classmethod
    def from_ppm(cls, bias_a=0.0, drift_ppm=0.0, **kwargs) -> "ClockParams":
        return cls(bias_a=bias_a, drift_b=drift_ppm * PPM, **kwargs)

    def validate(self) -> None:
        if not (math.isfinite(self.bias_a) and math.isfinite(self.drift_b)):
            raise InvalidParams("clock bias and drift must be finite")
        if self.drift_b <= -1:
            raise InvalidParams("drift_b must be > -1 (clock frequency must stay positive)")
        if abs(self.drift_b) > 100 * PPM:
            warnings.warn(
                f"clock drift {self.drift_b / PPM:.1f} ppm is beyond the usual few tens of ppm",
                stacklevel=3,
            )
        if not self.noise_sigma_w >= 0:
            raise InvalidParams("noise_sigma_w must be >= 0")
        if self.noise_model not in NOISE_MODELS:
            raise InvalidParams(f"unknown noise model {self.noise_model!r}")
        if self.noise_model != "gaussian" and not self.tick > 0:
            raise InvalidParams(f"noise model {self.noise_model!r} needs tick > 0")
        self.h_process.validate()


class ClockRealization:
    """One sampled clock trajectory.

    The slow error path is an exponentially correlated Gauss-Markov process
    sampled on a grid of step ``tau_corr / 10`` and linearly interpolated.  The
    grid grows lazily in both time directions from separate streams, so the
    value at any grid index depends only on ``(params, seed)``, never on the
    order in which times were queried.
    """

    def __init__(self, params: ClockParams, seed: int):
        self.params = params
        self.seed = int(seed)
        ss = np.random.SeedSequence(self.seed)
        fwd, bwd, noise = ss.spawn(3)
        self._rng_fwd = np.random.default_rng(fwd)
        self._rng_bwd = np.random.default_rng(bwd)
        self.rng_stream = np.random.default_rng(noise)

        hp = params.h_process
        self._step = hp.tau_corr / 10.0
        self._phi = math.exp(-0.1)
        self._fwd = np.empty(0)  # grid indices 0, 1, 2, ...
        self._bwd = np.empty(0)  # grid indices -1, -2, ...
        if hp.enabled:
            self._fwd = np.array([hp.sigma * self._rng_fwd.standard_normal()])

    @property
    def grid_step(self) -> float:
        return self._step

    def _ar1(self, start: float, rng: np.random.Generator, n: int) -> np.ndarray:
        sigma = self.params.h_process.sigma
        innov = sigma * math.sqrt(1.0 - self._phi**2) * rng.standard_normal(n)
        out, _ = lfilter([1.0], [1.0, -self._phi], innov, zi=[self._phi * start])
        return out

    def _ensure(self, lo: int, hi: int) -> None:
        while hi >= self._fwd.size:
            self._fwd = np.concatenate([self._fwd, self._ar1(self._fwd[-1], self._rng_fwd, _CHUNK)])
        while -lo > self._bwd.size:
            last = self._bwd[-1] if self._bwd.size else self._fwd[0]
            self._bwd = np.concatenate([self._bwd, self._ar1(last, self._rng_bwd, _CHUNK)])

    def grid_values(self, indices) -> np.ndarray:
        idx = np.asarray(indices, dtype=np.int64)
        if idx.size == 0:
            return np.zeros(idx.shape)
        self._ensure(int(idx.min()), int(idx.max()))
        out = np.empty(idx.shape)
        pos = idx >= 0
        out[pos] = self._fwd[idx[pos]]
        out[~pos] = self._bwd[-idx[~pos] - 1]
        return out

    def h(self, tau) -> np.ndarray:
        """Slow error at absolute times ``tau`` (seconds)."""
        tau = np.asarray(tau, dtype=float)
        if not self.params.h_process.enabled:
            return np.zeros(tau.shape)
        u = tau / self._step
        n0 = np.floor(u).astype(np.int64)
        frac = u - n0
        return (1.0 - frac) * self.grid_values(n0) + frac * self.grid_values(n0 + 1)

    def draw_noise(self, shape) -> np.ndarray:
        p = self.params
        if p.noise_model == "uniform":
            return self.rng_stream.uniform(-p.tick / 2, p.tick / 2, size=shape)
        if p.noise_sigma_w > 0:
            return p.noise_sigma_w * self.rng_stream.standard_normal(shape)
        return np.zeros(shape)

    def local_timestamp(self, r):
        return local_timestamp(self, r)


def sample_clock(params: ClockParams, seed: int) -> ClockRealization:
    params.validate()
    return ClockRealization(params, seed)


def local_timestamp(clock: ClockRealization, r):
    """Map absolute reception time(s) ``r`` to local timestamps, drawing fresh noise."""
    r_arr = np.asarray(r, dtype=float)
    if not np.all(np.isfinite(r_arr)):
        raise ValueError("reception times must be finite")
    p = clock.params
    s = p.bias_a + (1.0 + p.drift_b) * r_arr + clock.h(r_arr) + clock.draw_noise(r_arr.shape)
    if p.noise_model == "truncate":
        s = np.floor(s / p.tick) * p.tick
    if np.ndim(r) == 0:
        return float(s)
    return s
