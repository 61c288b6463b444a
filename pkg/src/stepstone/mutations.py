"""Infinite-sites mutations on genealogies.

Mutations fall at rate mu per lineage per unit of raw time and every one hits
a fresh site, so a mutation is identified by the branch it sits on and a
counter: ``(node, j)``.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import math
from collections import Counter
from typing import Optional

import numpy as np

from .genealogy import GenealogyTree
from .model import LimitParams
from .theory import time_change_inv

MutationId = tuple[int, int]


@dataclasses.dataclass(frozen=True)
class MutatedSample:
    leaf_mutations: tuple[frozenset, ...]
    branch_record: dict

    @property
    def n(self) -> int:
        return len(self.leaf_mutations)

    @property
    def n_mutations(self) -> int:
        return len(self.branch_record)

    def carriers(self, mid: MutationId) -> frozenset[int]:
        return frozenset(i for i, s in enumerate(self.leaf_mutations) if mid in s)


def drop_mutations(tree: GenealogyTree, mu: float, rng: np.random.Generator,
                   censor_time: Optional[float] = None) -> MutatedSample:
    """Poisson(mu * length) fresh mutations on every branch of ``tree``.

    Branches above the root carry nothing.  For a tree that did not reach its
    root, ``censor_time`` closes the open branches of the surviving lineages.
    """
    if mu < 0:
        raise ValueError(f"mutation rate must be >= 0, got {mu}")
    if not tree.root_reached:
        if censor_time is None:
            raise ValueError("tree did not coalesce; pass censor_time to close its branches")
        if tree.n_merges and censor_time < tree.merge_times[-1]:
            raise ValueError("censor_time precedes the last merge")
    times = tree.node_times()
    parent = tree.parents()
    below = tree.leaves_below()
    leaf_sets: list[set] = [set() for _ in range(tree.n)]
    record: dict[MutationId, tuple[int, float]] = {}
    for v in range(len(times)):
        if parent[v] >= 0:
            top = times[parent[v]]
        elif tree.root_reached:
            continue
        else:
            top = censor_time
        length = top - times[v]
        count = rng.poisson(mu * length) if length > 0 else 0
        if count == 0:
            continue
        at = times[v] + length * rng.random(count)
        for j in range(count):
            mid = (v, j)
            record[mid] = (v, float(at[j]))
            for leaf in below[v]:
                leaf_sets[leaf].add(mid)
    return MutatedSample(tuple(frozenset(s) for s in leaf_sets), record)


def pairwise_differences(sample: MutatedSample) -> tuple[np.ndarray, float]:
    """Matrix of symmetric-difference sizes and its mean over unordered pairs."""
    n = sample.n
    if n < 2:
        raise ValueError("need at least two leaves")
    m = np.zeros((n, n), dtype=np.int64)
    for i in range(n):
        for j in range(i + 1, n):
            m[i, j] = m[j, i] = len(sample.leaf_mutations[i] ^ sample.leaf_mutations[j])
    iu = np.triu_indices(n, 1)
    return m, float(m[iu].mean())


def haplotype_partition(sample: MutatedSample) -> list[int]:
    """Sizes of the groups of leaves with identical mutation sets, largest first."""
    return sorted(Counter(sample.leaf_mutations).values(), reverse=True)


def is_laminar(sample: MutatedSample) -> bool:
    """Every two carrier sets are nested or disjoint (perfect phylogeny)."""
    sets = {sample.carriers(m) for m in sample.branch_record}
    sets = sorted(sets, key=len)
    for i, a in enumerate(sets):
        for b in sets[i + 1:]:
            if a & b and not a <= b:
                return False
    return True


# -- expectations -----------------------------------------------------------


def pairwise_components(params: LimitParams) -> tuple[float, float]:
    """The two bracketed pieces of E(2 mu t0), divided by mu and by the survival factor.

    First the contribution after L^2/(2 nu), then the one before it.
    """
    p = params
    L2 = p.L**2
    late = (1 + p.alpha) * L2 * p.log_L / (math.pi * p.sigma2) / p.nu
    early = L2 * (1 - 1 / (2 * (p.alpha + 1) * p.log_L)) / p.nu
    return late, early


def survival_factor(params: LimitParams) -> float:
    return (params.alpha + params.beta) / (params.alpha + 1)


def expected_pairwise(params: LimitParams, mu: float) -> float:
    """Approximate mean number of differences between two sampled sequences."""
    late, early = pairwise_components(params)
    return mu * survival_factor(params) * (late + early)


def mutation_split(params: LimitParams, mu: float) -> tuple[float, float]:
    """Expected pairwise differences arising before and after coalescent time u1."""
    late, early = pairwise_components(params)
    s = survival_factor(params)
    return mu * s * early, mu * s * late


@dataclasses.dataclass(frozen=True)
class RateProfile:
    mu: float
    params: LimitParams

    @property
    def late_rate(self) -> float:
        """Constant rate per lineage in coalescent time once u > u1."""
        p = self.params
        return self.mu / (2 * p.nu) * (1 + p.alpha) * p.L**2 * p.log_L / (math.pi * p.sigma2)


def mutation_rate_profile(profile: RateProfile, u: float) -> float:
    """Per-lineage mutation rate in coalescent time at u (left value at u1)."""
    if u < 0:
        raise ValueError("u must be >= 0")
    p = profile.params
    if u <= p.u1:
        t = time_change_inv(p, u)
        dtdu = t * (p.alpha + p.beta) * math.exp(u) * 2 * p.log_L
        return profile.mu / (2 * p.nu) * dtdu
    return profile.late_rate


# -- exports ----------------------------------------------------------------


def _fmt_id(mid: MutationId) -> str:
    return f"{mid[0]}-{mid[1]}"


def write_haplotypes_csv(sample: MutatedSample, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["leaf_id", "mutations"])
        for i, s in enumerate(sample.leaf_mutations):
            w.writerow([i, ";".join(_fmt_id(m) for m in sorted(s))])


def write_partition_json(partition, path) -> None:
    with open(path, "w") as fh:
        json.dump([int(b) for b in partition], fh)
        fh.write("\n")
