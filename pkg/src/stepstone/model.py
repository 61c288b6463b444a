"""Model parameters and sample placement."""
from __future__ import annotations

import dataclasses
import itertools
import math
from typing import Optional

import numpy as np

from .lattice import DisplacementKernel, build_kernel, check_torus, wrap_array

MAX_SAMPLE_ATTEMPTS = 10**6


class InfeasibleGeometry(ValueError):
    pass


@dataclasses.dataclass(frozen=True)
class LineageState:
    colony: tuple[int, int]
    individual: int


@dataclasses.dataclass(frozen=True)
class LimitParams:
    """Inputs to the closed-form limit laws.

    ``sigma2`` is a plain number here so formulas can be evaluated for
    values no lattice kernel realises.
    """

    alpha: float
    beta: float
    L: float
    nu: float
    sigma2: float

    def __post_init__(self):
        if not 0.0 < self.beta <= 1.0:
            raise ValueError(f"beta must lie in (0, 1], got {self.beta}")
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if self.L <= 1 or self.nu <= 0 or self.sigma2 <= 0:
            raise ValueError("L > 1, nu > 0 and sigma2 > 0 are required")

    @classmethod
    def from_model(cls, L: float, N: float, nu: float, sigma2: float, beta: float) -> "LimitParams":
        return cls(alpha=alpha_value(L, N, nu, sigma2), beta=beta, L=L, nu=nu, sigma2=sigma2)

    @property
    def log_L(self) -> float:
        return math.log(self.L)

    @property
    def late_rate(self) -> float:
        """Exponential decay rate of the tail past t = L^2 (t = 2 nu * raw time)."""
        return math.pi * self.sigma2 / ((1 + self.alpha) * self.L**2 * self.log_L)

    @property
    def u1(self) -> float:
        return math.log((self.alpha + 1) / (self.alpha + self.beta))


def alpha_value(L: float, N: float, nu: float, sigma2: float) -> float:
    return 2 * N * nu * math.pi * sigma2 / math.log(L)


@dataclasses.dataclass(frozen=True)
class ModelParams:
    L: int
    N: int
    nu: float
    kernel: DisplacementKernel

    def __post_init__(self):
        if isinstance(self.kernel, (str, dict)):
            object.__setattr__(self, "kernel", build_kernel(self.kernel))
        if int(self.L) != self.L or int(self.N) != self.N:
            raise ValueError("L and N must be integers")
        if self.N < 1:
            raise ValueError(f"N must be >= 1, got {self.N}")
        if not 0.0 < self.nu <= 1.0:
            raise ValueError(f"nu must lie in (0, 1], got {self.nu}")
        check_torus(self.kernel, self.L)

    @property
    def slots(self) -> int:
        return 2 * self.N

    @property
    def sigma2(self) -> float:
        return self.kernel.sigma2

    @property
    def alpha(self) -> float:
        return alpha_value(self.L, self.N, self.nu, self.sigma2)

    @property
    def h_L(self) -> float:
        return (1 + self.alpha) * self.L**2 * math.log(self.L) / (2 * math.pi * self.sigma2 * self.nu)

    @property
    def kappa_L(self) -> float:
        return 1 - 2 * math.log(math.log(self.L)) / math.log(self.L)

    @property
    def N_e(self) -> float:
        return (1 + self.alpha) * self.L**2 * math.log(self.L) / (4 * math.pi * self.sigma2 * self.nu)

    def limit(self, beta: float) -> LimitParams:
        return LimitParams(alpha=self.alpha, beta=beta, L=self.L, nu=self.nu, sigma2=self.sigma2)

    def kernel_arrays(self):
        k = self.kernel
        return k.offsets, k.cumulative(), k.is_uniform

    def describe(self) -> dict:
        return {"L": self.L, "N": self.N, "nu": self.nu, "kernel": self.kernel.describe()}


@dataclasses.dataclass(frozen=True)
class SampleGeometry:
    """Where sampled lineages start.

    ``spread``: pairwise distances at least L / log L.
    ``clustered``: pairwise distances in (L^beta / log L, c beta L^beta log L).
    """

    mode: str
    n: int
    c: float = 1.0
    beta: Optional[float] = None

    def __post_init__(self):
        if self.mode not in ("spread", "clustered"):
            raise ValueError(f"unknown sample mode {self.mode!r}")
        if self.n < 1:
            raise ValueError("sample size must be >= 1")
        if self.mode == "clustered":
            if self.beta is None or not 0 < self.beta <= 1:
                raise ValueError("clustered samples need beta in (0, 1]")
            if self.c <= 0:
                raise ValueError("c must be positive")

    def window(self, L: int) -> tuple[float, float]:
        lg = math.log(L)
        if self.mode == "spread":
            return L / lg, math.inf
        b = self.beta
        return L**b / lg, self.c * b * L**b * lg

    def describe(self) -> dict:
        d = {"mode": self.mode, "n": self.n}
        if self.mode == "clustered":
            d.update(c=self.c, beta=self.beta)
        return d


def _torus_dists(p: np.ndarray, pts: np.ndarray, L: int) -> np.ndarray:
    d = wrap_array(pts - p, L)
    return np.hypot(d[:, 0], d[:, 1])


def _in_window(d, lo, hi, spread):
    if spread:
        return d >= lo
    return (d > lo) & (d < hi)


def make_sample(params: ModelParams, geom: SampleGeometry, rng: np.random.Generator):
    """Draw ``geom.n`` lineages, one per colony, obeying the distance window."""
    L = params.L
    lo, hi = geom.window(L)
    spread = geom.mode == "spread"
    half = L // 2
    if not spread:
        reach = min(half, int(math.ceil(hi)))
        if geom.n > 1 and not any(
            lo < math.hypot(a, b) < hi
            for a in range(0, reach + 1) for b in range(0, reach + 1)
        ):
            raise InfeasibleGeometry(
                f"no integer distance lies in the window ({lo:.4g}, {hi:.4g}) for L={L}"
            )
    attempts = 0
    while True:
        first = rng.integers(-((L - 1) // 2), half + 1, size=2)
        pts = [first]
        while len(pts) < geom.n:
            attempts += 1
            if attempts > MAX_SAMPLE_ATTEMPTS:
                win = f"[{lo:.4g}, inf)" if spread else f"({lo:.4g}, {hi:.4g})"
                raise InfeasibleGeometry(
                    f"could not place {geom.n} points with pairwise distances in {win} on L={L}"
                )
            if spread:
                cand = rng.integers(-((L - 1) // 2), half + 1, size=2)
            else:
                cand = wrap_array(first + rng.integers(-reach, reach + 1, size=2), L)
            d = _torus_dists(cand, np.array(pts), L)
            if np.all(_in_window(d, lo, hi, spread)):
                pts.append(cand)
            elif attempts % 1000 == 0:
                break
        if len(pts) == geom.n:
            break
    inds = rng.integers(0, params.slots, size=geom.n)
    return [LineageState((int(p[0]), int(p[1])), int(i)) for p, i in zip(pts, inds)]


def pairwise_distances(colonies, L: int) -> list[float]:
    pts = np.array(colonies)
    return [float(_torus_dists(pts[i], pts[j:j + 1], L)[0])
            for i, j in itertools.combinations(range(len(pts)), 2)]
