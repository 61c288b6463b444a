"""Forward-in-time Moran stepping stone model at toy scale.

This exists to check the backward simulator: two slots share a label at time
t exactly when their lineages traced back from t have coalesced.  It is
capped at 10^4 slots and is not meant for experiments.
"""
from __future__ import annotations

import dataclasses
from typing import Optional

import numpy as np

from . import _engine
from .genealogy import coalescence_probability
from .lattice import wrap
from .model import ModelParams
from .rng import map_replicates

MAX_SLOTS = 10**4


class ScaleGuardError(ValueError):
    pass


@dataclasses.dataclass(frozen=True)
class ColonyLattice:
    """Labels of every slot, indexed ``labels[x mod L, y mod L, slot]``."""

    L: int
    N: int
    labels: np.ndarray
    time: float = 0.0

    @property
    def slots(self) -> int:
        return 2 * self.N

    def n_labels(self) -> int:
        return int(np.unique(self.labels).size)

    def colony(self, point) -> np.ndarray:
        x, y = wrap(point, self.L)
        return self.labels[x % self.L, y % self.L]

    @classmethod
    def fresh(cls, L: int, N: int) -> "ColonyLattice":
        labels = np.arange(L * L * 2 * N, dtype=np.int64).reshape(L, L, 2 * N)
        return cls(L, N, labels)


def run_forward(params: ModelParams, duration: float, rng: np.random.Generator,
                nu: Optional[float] = None) -> ColonyLattice:
    """Run the Moran dynamics from all-distinct labels for ``duration`` raw time.

    Every slot is replaced at rate 1, so the number of events is
    Poisson(2N L^2 * duration) and each picks its slot uniformly.  ``nu``
    overrides the migration probability and may be 0 here.
    """
    total = params.slots * params.L**2
    if total > MAX_SLOTS:
        raise ScaleGuardError(f"forward runs are capped at {MAX_SLOTS} slots, got 2N L^2 = {total}")
    if duration < 0:
        raise ValueError("duration must be >= 0")
    nu = params.nu if nu is None else float(nu)
    if not 0.0 <= nu <= 1.0:
        raise ValueError(f"nu must lie in [0, 1], got {nu}")
    lat = ColonyLattice.fresh(params.L, params.N)
    n_events = int(rng.poisson(total * duration)) if duration > 0 else 0
    offsets, cum, uniform = params.kernel_arrays()
    _engine.forward_moran(rng, lat.labels, params.L, params.slots, nu, offsets, cum, uniform, n_events)
    return dataclasses.replace(lat, time=float(duration))


def identity_probability(lattice: ColonyLattice, colony_a, colony_b, rng: np.random.Generator) -> bool:
    """One uniform slot from each colony; True when their labels agree."""
    a = lattice.colony(colony_a)[rng.integers(lattice.slots)]
    b = lattice.colony(colony_b)[rng.integers(lattice.slots)]
    return bool(a == b)


def _forward_hit(rng, params, x, t):
    return identity_probability(run_forward(params, t, rng), (0, 0), x, rng)


def forward_identity(params: ModelParams, x, t: float, replicates: int, seed: int,
                     workers: int = 1) -> tuple[float, float]:
    """Monte Carlo P(slots drawn from colonies 0 and x share a label at t)."""
    hits = np.array(map_replicates(_forward_hit, (params, tuple(x), t), seed, f"forward:{t!r}",
                                   replicates, workers))
    p = float(hits.mean())
    return p, float(np.sqrt(p * (1 - p) / replicates))


def duality_check(params: ModelParams, x, times, replicates: int, seed: int,
                  workers: int = 1) -> list[dict]:
    """Forward identity against backward coalescence by time t, one row per t."""
    rows = []
    for t in times:
        fwd, fwd_se = forward_identity(params, x, t, replicates, seed, workers)
        bwd, bwd_se = coalescence_probability(params, (0, 0), tuple(x), t, replicates, seed, workers)
        rows.append({"t": float(t), "forward": fwd, "forward_se": fwd_se,
                     "backward": bwd, "backward_se": bwd_se, "diff": abs(fwd - bwd)})
    return rows
