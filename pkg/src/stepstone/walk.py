"""Continuous-time random walks on Z^2 and on the torus.

A walk jumps at the points of a rate-``jump_rate`` Poisson process with
increments drawn from the kernel.  Given the number of jumps in a window the
jump instants are uniform order statistics, which is what makes the hitting
time of the origin exact without simulating holding times one by one.
"""
from __future__ import annotations

import dataclasses
import math
from typing import Optional, Union

import numpy as np

from . import _engine
from .lattice import DisplacementKernel, FullKernel, wrap, wrap_array
from .rng import map_replicates


@dataclasses.dataclass(frozen=True)
class WalkConfig:
    kernel: Union[DisplacementKernel, FullKernel]
    jump_rate: float = 1.0
    L: Optional[int] = None

    def __post_init__(self):
        if not self.jump_rate > 0:
            raise ValueError("jump_rate must be positive")
        if self.L is not None and self.L < max(2, 2 * self.kernel.range):
            raise ValueError(f"torus side L={self.L} must be >= 2K = {2 * self.kernel.range}")

    def table(self) -> tuple[np.ndarray, np.ndarray]:
        """Support and probabilities of one jump, including a lazy (0, 0)."""
        if isinstance(self.kernel, FullKernel):
            items = sorted(self.kernel.table().items())
            return (np.array([z for z, _ in items], dtype=np.int64),
                    np.array([p for _, p in items]))
        return self.kernel.offsets, self.kernel.probs

    def engine_arrays(self):
        offsets, probs = self.table()
        cum = np.cumsum(probs)
        cum[-1] = 1.0
        return offsets, cum, bool(np.all(probs == probs[0]))

    def _finish(self, p):
        return wrap(p, self.L) if self.L else (int(p[0]), int(p[1]))


@dataclasses.dataclass(frozen=True)
class HittingRecord:
    hit: bool
    time: Optional[float]
    jumps: int


def simulate_walk(config: WalkConfig, start, duration: float, rng: np.random.Generator):
    """Endpoint after running the walk for ``duration`` from ``start``."""
    if duration < 0:
        raise ValueError("duration must be >= 0")
    if duration == 0:
        return config._finish(start)
    offsets, probs = config.table()
    m = rng.poisson(config.jump_rate * duration)
    counts = rng.multinomial(m, probs)
    end = np.asarray(start, dtype=np.int64) + counts @ offsets
    return config._finish(end)


def simulate_path(config: WalkConfig, start, duration: float, rng: np.random.Generator):
    """Jump instants and positions after each jump over [0, duration]."""
    if duration < 0:
        raise ValueError("duration must be >= 0")
    offsets, probs = config.table()
    times = []
    t = rng.exponential(1 / config.jump_rate)
    while t <= duration:
        times.append(t)
        t += rng.exponential(1 / config.jump_rate)
    idx = rng.choice(len(probs), size=len(times), p=probs)
    steps = offsets[idx]
    pos = np.asarray(start, dtype=np.int64) + np.cumsum(steps, axis=0)
    if config.L:
        pos = wrap_array(pos, config.L)
    return np.array(times), pos.reshape(-1, 2)


def hit_origin(config: WalkConfig, start, horizon: float, rng: np.random.Generator) -> HittingRecord:
    """First visit to the origin colony before ``horizon``."""
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    s = config._finish(start)
    if s == (0, 0):
        return HittingRecord(True, 0.0, 0)
    m = int(rng.poisson(config.jump_rate * horizon))
    if m == 0:
        return HittingRecord(False, None, 0)
    offsets, cum, uniform = config.engine_arrays()
    step = _engine.first_hit_step(rng, offsets, cum, uniform, s[0], s[1], m, config.L or 0)
    if step < 0:
        return HittingRecord(False, None, m)
    # the step-th of m uniform jump instants on [0, horizon]
    return HittingRecord(True, horizon * rng.beta(step, m - step + 1), step)


def _q_start_hit(rng, config, horizon):
    base = config.kernel.base if isinstance(config.kernel, FullKernel) else config.kernel
    i = int(np.searchsorted(base.cumulative(), rng.random(), side="right"))
    z = base.offsets[min(i, len(base.probs) - 1)]
    rec = hit_origin(config, (int(z[0]), int(z[1])), horizon, rng)
    return rec.time if rec.hit else math.inf


def hit_times_from_q(config: WalkConfig, horizon: float, replicates: int, seed: int,
                     workers: int = 1) -> np.ndarray:
    """First hitting times of the origin from q-distributed starts, inf if censored."""
    return np.array(map_replicates(_q_start_hit, (config, horizon), seed, "hit_q", replicates, workers))


def hit_tail_estimate(config: WalkConfig, t: float, replicates: int, seed: int,
                      workers: int = 1) -> tuple[float, float]:
    """Monte Carlo P_q(T_0 > t) with its binomial standard error."""
    if replicates < 100:
        raise ValueError("need at least 100 replicates")
    if t == 0:
        return 1.0, 0.0
    times = hit_times_from_q(config, t, replicates, seed, workers)
    p = float(np.mean(times > t))
    return p, math.sqrt(p * (1 - p) / replicates)


def hit_tail_asymptotic(sigma2: float, t: float) -> float:
    """2 pi sigma^2 / log t."""
    return 2 * math.pi * sigma2 / math.log(t)
