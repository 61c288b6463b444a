"""Two linked loci: recombination before coalescence and LD statistics.

Each sampled chromosome starts as one lineage carrying loci a and b.  When a
lineage carrying both is replaced, with probability r the two loci take
independently drawn parents and the lineage splits in two.
"""
from __future__ import annotations

import csv
import dataclasses
import math
from typing import Optional, Sequence

import numpy as np

from . import _engine
from .genealogy import survival_estimate
from .model import LimitParams, ModelParams, SampleGeometry, make_sample
from .rng import map_replicates


@dataclasses.dataclass(frozen=True)
class TwoLocusOutcome:
    t0_a: float
    t0_b: float
    first_recomb_time: Optional[float]
    nrbc: Optional[bool]
    jumps_before_coal: int
    events: int = 0


def simulate_two_locus_pair(params: ModelParams, geom: SampleGeometry, r: float,
                            rng: np.random.Generator, *, horizon: float = math.inf,
                            stop_at_decision: bool = False, sample=None) -> TwoLocusOutcome:
    """Backward two-locus dynamics for a sample of two chromosomes.

    ``nrbc`` is None when the horizon passes before either a recombination or
    the joint coalescence.  With ``stop_at_decision`` the run ends as soon as
    the NRBC indicator is known, leaving later coalescence times at ``inf``.
    """
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"recombination probability must lie in [0, 1], got {r}")
    if sample is None:
        if geom.n != 2:
            raise ValueError("two-locus runs take a sample of size 2")
        sample = make_sample(params, geom, rng)
    x0 = np.array([s.colony[0] for s in sample], dtype=np.int64)
    y0 = np.array([s.colony[1] for s in sample], dtype=np.int64)
    s0 = np.array([s.individual for s in sample], dtype=np.int64)
    if (x0[0], y0[0], s0[0]) == (x0[1], y0[1], s0[1]):
        raise ValueError("sampled chromosomes must occupy distinct slots")
    offsets, cum, uniform = params.kernel_arrays()
    ta, tb, rec, flag, jumps, events = _engine.two_locus(
        rng, params.L, params.slots, params.nu, offsets, cum, uniform,
        x0, y0, s0, float(r), float(horizon), bool(stop_at_decision),
    )
    return TwoLocusOutcome(
        t0_a=ta,
        t0_b=tb,
        first_recomb_time=None if math.isinf(rec) else rec,
        nrbc=None if flag < 0 else bool(flag),
        jumps_before_coal=int(jumps),
        events=int(events),
    )


def _nrbc_flag(rng, params, geom, r):
    out = simulate_two_locus_pair(params, geom, r, rng, stop_at_decision=True)
    return out.nrbc


def _skeleton_jumps(rng, params, geom):
    return simulate_two_locus_pair(params, geom, 0.0, rng).jumps_before_coal


def coalescence_jump_counts(params: ModelParams, geom: SampleGeometry, replicates: int, seed: int,
                            workers: int = 1) -> np.ndarray:
    """Replacement events on the joint lineages before coalescence, with no recombination."""
    return np.array(map_replicates(_skeleton_jumps, (params, geom), seed, "skeleton",
                                   replicates, workers), dtype=np.int64)


def skeleton_nrbc(jumps: np.ndarray, r: float) -> tuple[float, float]:
    """E[(1 - r)^J] and its standard error from a sample of jump counts."""
    vals = np.exp(jumps * math.log1p(-r)) if r < 1 else (jumps == 0).astype(float)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(len(vals)))


def nrbc_direct(params: ModelParams, geom: SampleGeometry, r: float, replicates: int, seed: int,
                workers: int = 1) -> tuple[float, float]:
    """Fraction of runs with no recombination before coalescence, and its standard error."""
    if r == 0:
        return 1.0, 0.0
    flags = map_replicates(_nrbc_flag, (params, geom, r), seed, f"nrbc:{r!r}", replicates, workers)
    return survival_estimate(np.array([bool(f) for f in flags]))


@dataclasses.dataclass(frozen=True)
class NRBCEstimate:
    direct: float
    direct_se: float
    skeleton: float
    skeleton_se: float


def nrbc_mc(params: ModelParams, geom: SampleGeometry, r: float, replicates: int, seed: int,
            workers: int = 1, jumps: Optional[np.ndarray] = None) -> NRBCEstimate:
    """Monte Carlo NRBC probability: direct indicator and the r = 0 skeleton estimator.

    ``jumps`` may carry precomputed skeleton counts so a whole curve reuses
    one set of r = 0 runs.
    """
    if replicates < 100:
        raise ValueError("nrbc_mc needs at least 100 replicates")
    if r == 0:
        return NRBCEstimate(1.0, 0.0, 1.0, 0.0)
    p, se = nrbc_direct(params, geom, r, replicates, seed, workers)
    if jumps is None:
        jumps = coalescence_jump_counts(params, geom, replicates, seed, workers)
    sk, sk_se = skeleton_nrbc(jumps, r)
    return NRBCEstimate(p, se, sk, sk_se)


def ell(params: LimitParams, u: float) -> float:
    """beta v (log(1/u) / (2 log L)) ^ 1."""
    return min(max(params.beta, math.log(1 / u) / (2 * params.log_L)), 1.0)


def nrbc_analytic(params: LimitParams, r: float) -> float:
    """Approximate P(no recombination before coalescence) for a clustered pair.

    Uses the form assembled at the end of the derivation, with u = r / nu:
    e^{-u L^{2b}} - (e^{-u L^{2b}} - e^{-u L^2}) (a+b)/(a+ell(u))
    - e^{-u L^2} ((a+b)/(a+1)) u / (u + pi s2 / ((1+a) L^2 log L)).
    The displayed statement repeats its first exponential and misplaces the
    (a+b)/(a+ell(u)) factor; that version is not what the derivation yields.
    """
    if r < 0:
        raise ValueError("r must be >= 0")
    if r == 0:
        return 1.0
    p = params
    u = r / p.nu
    e_beta = math.exp(-u * p.L ** (2 * p.beta))
    e_one = math.exp(-u * p.L**2)
    s = (p.alpha + p.beta) / (p.alpha + 1)
    f = (p.alpha + p.beta) / (p.alpha + ell(p, u))
    # grouped by exponential so the cancellation at ell(u) = beta is exact
    return e_beta * (1 - f) + e_one * (f - s * u / (u + p.late_rate))


def nrbc_changeovers(params: LimitParams) -> tuple[float, float]:
    """Recombination probabilities where u L^2 = 1 and u L^{2 beta} = 1."""
    return params.nu / params.L**2, params.nu * params.L ** (-2 * params.beta)


def nrbc_homogeneous(Ne: float, r: float) -> float:
    """NRBC for a pair in a well-mixed population of effective size Ne.

    Coalescence at rate 1/(2 Ne) competes with recombination at rate 2 r.
    """
    if Ne <= 0 or r < 0:
        raise ValueError("need Ne > 0 and r >= 0")
    return 1 / (1 + 4 * Ne * r)


@dataclasses.dataclass(frozen=True)
class HaplotypeTable:
    AB: int
    Ab: int
    aB: int
    ab: int

    def __post_init__(self):
        if min(self.AB, self.Ab, self.aB, self.ab) < 0:
            raise ValueError("haplotype counts must be nonnegative")
        if self.total == 0:
            raise ValueError("empty haplotype table")

    @property
    def total(self) -> int:
        return self.AB + self.Ab + self.aB + self.ab

    def frequencies(self) -> tuple[float, float, float, float]:
        n = self.total
        return self.AB / n, self.Ab / n, self.aB / n, self.ab / n


def ld_stats(table: HaplotypeTable) -> tuple[float, float]:
    """(r^2, D') for a two-locus haplotype table; NaN where undefined.

    D' is normalised after relabelling so that f_A >= f_B >= 1/2, where the
    maximum covariance is f_B - f_A f_B.
    """
    fAB, fAb, faB, fab = table.frequencies()
    # 2x2 table indexed [allele at first locus][allele at second locus]
    m = np.array([[fAB, fAb], [faB, fab]])
    # ties keep the given labels
    if m[0].sum() < 0.5:
        m = m[::-1]
    if m[:, 0].sum() < 0.5:
        m = m[:, ::-1]
    if m[:, 0].sum() > m[0].sum():
        m = m.T
    fA = m[0].sum()
    fB = m[:, 0].sum()
    D = m[0, 0] - fA * fB
    denom = fA * (1 - fA) * fB * (1 - fB)
    r2 = D * D / denom if denom > 0 else math.nan
    dmax = fB - fA * fB
    dprime = D / dmax if dmax > 0 else math.nan
    return r2, dprime


def sigma_d2_homogeneous(rho: float) -> float:
    """Expected r^2 proxy in a well-mixed population: (10 + rho)/(22 + 13 rho + rho^2)."""
    if rho < 0:
        raise ValueError("rho must be >= 0")
    return (10 + rho) / (22 + 13 * rho + rho * rho)


CURVE_COLUMNS = ["distance_nt", "r", "nrbc_mc", "nrbc_mc_se", "nrbc_analytic", "nrbc_homogeneous"]


def write_nrbc_curve(rows: Sequence[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CURVE_COLUMNS, lineterminator="\n", extrasaction="ignore")
        w.writeheader()
        for row in rows:
            w.writerow({k: repr(row[k]) if isinstance(row[k], float) else row[k] for k in CURVE_COLUMNS})
