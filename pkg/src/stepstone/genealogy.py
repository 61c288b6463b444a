"""Backward-in-time coalescing lineages under the Moran stepping stone model.

Each active lineage sits in one of the 2N slots of a colony.  Its slot is
replaced at rate 1; the parent is drawn from the same colony with probability
1 - nu, otherwise from colony x + z with z ~ q, and the parent's slot is
uniform among the 2N.  The lineage moves there, merging with whichever
lineage already occupies that slot.
"""
from __future__ import annotations

import csv
import dataclasses
import itertools
import math
from typing import Optional, Sequence

import numpy as np

from . import _engine
from .model import LineageState, ModelParams, SampleGeometry, make_sample
from .rng import map_replicates

SAFETY_FACTOR = 1e4


@dataclasses.dataclass(frozen=True)
class GenealogyTree:
    """Merge history of n sampled lineages.

    Leaves are nodes 0..n-1 and merge j creates node n + j.  Times are raw
    model time (each slot replaced at rate 1).
    """

    leaves: tuple[LineageState, ...]
    merge_times: np.ndarray
    merge_children: np.ndarray
    merge_states: tuple[LineageState, ...]
    root_reached: bool
    horizon: float = math.inf
    events: int = 0
    trace: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return len(self.leaves)

    @property
    def n_merges(self) -> int:
        return len(self.merge_times)

    def lineage_count_at(self, t: float) -> int:
        return lineage_count_at(self, t)

    def node_times(self) -> np.ndarray:
        return np.concatenate([np.zeros(self.n), self.merge_times])

    def parents(self) -> np.ndarray:
        """Parent node of every node, -1 for the current roots."""
        par = np.full(self.n + self.n_merges, -1, dtype=np.int64)
        for j, (a, b) in enumerate(self.merge_children):
            par[a] = par[b] = self.n + j
        return par

    def leaves_below(self) -> list[frozenset[int]]:
        below = [frozenset([i]) for i in range(self.n)]
        for a, b in self.merge_children:
            below.append(below[a] | below[b])
        return below

    def to_csv(self, path, h_L: float) -> None:
        write_tree_csv(self, path, h_L)


def lineage_count_at(tree: GenealogyTree, t: float) -> int:
    """Number of lineages remaining at raw time t (right-continuous)."""
    if t < 0:
        raise ValueError("t must be >= 0")
    return tree.n - int(np.searchsorted(tree.merge_times, t, side="right"))


def first_coalescing_pair(tree: GenealogyTree) -> Optional[frozenset[int]]:
    """Clusters joined by the earliest merge, or None if nothing merged."""
    if tree.n_merges == 0:
        return None
    a, b = tree.merge_children[0]
    return frozenset((int(a), int(b)))


def _sample_arrays(sample: Sequence[LineageState]):
    x0 = np.array([s.colony[0] for s in sample], dtype=np.int64)
    y0 = np.array([s.colony[1] for s in sample], dtype=np.int64)
    s0 = np.array([s.individual for s in sample], dtype=np.int64)
    return x0, y0, s0


def simulate_genealogy(
    params: ModelParams,
    sample: Sequence[LineageState],
    horizon: Optional[float] = None,
    rng: Optional[np.random.Generator] = None,
    *,
    min_lineages: int = 1,
    trace: int = 0,
) -> GenealogyTree:
    """Run the exact backward dynamics until ``min_lineages`` remain or ``horizon``.

    With no horizon the run is capped at 1e4 * h_L and a RuntimeError is
    raised if the sample has still not coalesced by then.
    """
    if rng is None:
        rng = np.random.default_rng()
    slots = {(s.colony, s.individual) for s in sample}
    if len(slots) != len(sample):
        raise ValueError("sample lineages must occupy distinct slots")
    for s in sample:
        if not 0 <= s.individual < params.slots:
            raise ValueError(f"individual index {s.individual} outside [0, {params.slots})")
    unbounded = horizon is None or math.isinf(horizon)
    cap = SAFETY_FACTOR * params.h_L if unbounded else float(horizon)
    x0, y0, s0 = _sample_arrays(sample)
    offsets, cum, uniform = params.kernel_arrays()
    mt, mch, mpos, nev, tr = _engine.genealogy(
        rng, params.L, params.slots, params.nu, offsets, cum, uniform,
        x0, y0, s0, cap, max(1, int(min_lineages)), int(trace),
    )
    remaining = len(sample) - len(mt)
    if unbounded and remaining > min_lineages:
        raise RuntimeError(
            f"{remaining} lineages still separate after {cap:.4g} time units (1e4 * h_L); "
            "check the model parameters"
        )
    states = tuple(LineageState((int(p[0]), int(p[1])), int(p[2])) for p in mpos)
    return GenealogyTree(
        leaves=tuple(sample),
        merge_times=mt,
        merge_children=mch,
        merge_states=states,
        root_reached=remaining == 1,
        horizon=math.inf if unbounded else float(horizon),
        events=int(nev),
        trace=tr if trace else None,
    )


def write_tree_csv(tree: GenealogyTree, path, h_L: float) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["merge_index", "time_raw", "time_scaled_by_hL", "child_a", "child_b",
                    "colony_x", "colony_y"])
        for j, (t, (a, b), st) in enumerate(zip(tree.merge_times, tree.merge_children,
                                                tree.merge_states)):
            w.writerow([j, repr(float(t)), repr(float(t / h_L)), int(a), int(b),
                        st.colony[0], st.colony[1]])


# -- replicate drivers ------------------------------------------------------


def _pair_time(rng, params, geom, horizon):
    sample = make_sample(params, geom, rng)
    tree = simulate_genealogy(params, sample, horizon, rng)
    return float(tree.merge_times[0]) if tree.n_merges else math.inf


def pair_coalescence_times(params: ModelParams, geom: SampleGeometry, horizon: float,
                           replicates: int, seed: int, workers: int = 1) -> np.ndarray:
    """Coalescence time of fresh two-lineage samples, ``inf`` when censored."""
    if geom.n != 2:
        raise ValueError("pair coalescence needs a sample of size 2")
    out = map_replicates(_pair_time, (params, geom, horizon), seed, "pair_time", replicates, workers)
    return np.array(out)


def survival_estimate(hits: np.ndarray) -> tuple[float, float]:
    """Proportion of True entries and its binomial standard error."""
    n = len(hits)
    p = float(np.mean(hits))
    return p, math.sqrt(max(p * (1 - p), 0.0) / n)


def pair_time_survival(params: ModelParams, geom: SampleGeometry, gamma: float, replicates: int,
                       seed: int, workers: int = 1) -> tuple[float, float]:
    """Monte Carlo P(t0 > L^{2 gamma} / (2 nu)) over fresh clustered pairs."""
    beta = geom.beta if geom.beta is not None else 1.0
    if not 0 < beta <= gamma <= 1:
        raise ValueError(f"need 0 < beta <= gamma <= 1, got beta={beta}, gamma={gamma}")
    horizon = params.L ** (2 * gamma) / (2 * params.nu)
    t0 = pair_coalescence_times(params, geom, horizon, replicates, seed, workers)
    return survival_estimate(t0 > horizon)


def _counts_at(rng, params, geom, times):
    sample = make_sample(params, geom, rng)
    tree = simulate_genealogy(params, sample, max(times), rng)
    return [lineage_count_at(tree, t) for t in times]


def lineage_count_samples(params: ModelParams, geom: SampleGeometry, times: Sequence[float],
                          replicates: int, seed: int, workers: int = 1) -> np.ndarray:
    """Array (replicates, len(times)) of lineage counts at the given raw times."""
    out = map_replicates(_counts_at, (params, geom, list(times)), seed, "counts", replicates, workers)
    return np.array(out, dtype=np.int64).reshape(replicates, len(times))


def _first_pair(rng, params, geom):
    sample = make_sample(params, geom, rng)
    tree = simulate_genealogy(params, sample, None, rng, min_lineages=geom.n - 1)
    pair = first_coalescing_pair(tree)
    return tuple(sorted(pair))


def first_pair_counts(params: ModelParams, geom: SampleGeometry, replicates: int, seed: int,
                      workers: int = 1) -> dict[tuple[int, int], int]:
    """How often each leaf pair is the first to coalesce."""
    pairs = map_replicates(_first_pair, (params, geom), seed, "first_pair", replicates, workers)
    counts = {p: 0 for p in itertools.combinations(range(geom.n), 2)}
    for p in pairs:
        counts[p] += 1
    return counts


def _coalesced_by(rng, params, a, b, t):
    ia, ib = rng.integers(0, params.slots, size=2)
    if tuple(a) == tuple(b) and ia == ib:
        return True
    sample = [LineageState(tuple(a), int(ia)), LineageState(tuple(b), int(ib))]
    tree = simulate_genealogy(params, sample, t, rng)
    return tree.n_merges == 1


def coalescence_probability(params: ModelParams, colony_a, colony_b, t: float, replicates: int,
                            seed: int, workers: int = 1) -> tuple[float, float]:
    """P(t0 <= t) for one uniform slot from each of two colonies."""
    hits = map_replicates(_coalesced_by, (params, colony_a, colony_b, t), seed, "coal_by",
                          replicates, workers)
    return survival_estimate(np.array(hits))
