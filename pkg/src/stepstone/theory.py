"""Closed-form limit laws and the time changes between model and coalescent time.

Three clocks appear throughout:

* raw model time (each slot replaced at rate 1),
* ``t = 2 nu * raw``, the scale on which the tail formulas are written,
* coalescent time ``u``, on which a clustered sample's genealogy is Kingman's
  coalescent.
"""
from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse
from scipy.sparse.linalg import expm_multiply

from .lattice import wrap
from .model import LimitParams, ModelParams, alpha_value


def _death_generator(n: int) -> np.ndarray:
    # state index k - 1 holds k lineages
    Q = np.zeros((n, n))
    for k in range(2, n + 1):
        rate = k * (k - 1) / 2
        Q[k - 1, k - 1] = -rate
        Q[k - 1, k - 2] = rate
    return Q


def kingman_distribution(n: int, t: float) -> np.ndarray:
    """P_n(D_t = k) for k = 1..n as an array indexed by k - 1."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if t < 0:
        raise ValueError("t must be >= 0")
    if n == 1 or t == 0:
        out = np.zeros(n)
        out[-1] = 1.0
        return out
    row = scipy.linalg.expm(_death_generator(n) * t)[n - 1]
    row = np.clip(row, 0.0, 1.0)
    return row


def kingman_pmf(n: int, k: int, t: float) -> float:
    """Probability that the pure death chain started at n sits at k after time t."""
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    return float(kingman_distribution(n, t)[k - 1])


def thm1_survival(beta: float, gamma: float, alpha: float) -> float:
    """Limit of P_x(t0 > L^{2 gamma} / (2 nu)) for |x| on the L^beta scale."""
    if not 0 < beta <= gamma <= 1:
        raise ValueError(f"need 0 < beta <= gamma <= 1, got beta={beta}, gamma={gamma}")
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    return (beta + alpha) / (gamma + alpha)


def late_tail(beta: float, alpha: float, t: float) -> float:
    """Limit of P_x(t0 > L^2/(2 nu) + h_L t)."""
    if t < 0:
        raise ValueError("t must be >= 0")
    return (beta + alpha) / (1 + alpha) * math.exp(-t)


def tail_unscaled(params: LimitParams, t: float) -> float:
    """Approximate P(t0 >= t / (2 nu)) for t >= L^{2 beta}."""
    p = params
    L2 = p.L**2
    if t < p.L ** (2 * p.beta) * (1 - 1e-12):
        raise ValueError(f"t={t} lies below L^(2 beta) = {p.L ** (2 * p.beta)}")
    if t <= L2:
        g = math.log(t) / (2 * p.log_L)
        return (p.alpha + p.beta) / (p.alpha + max(g, p.beta))
    return (p.alpha + p.beta) / (p.alpha + 1) * math.exp(-(t - L2) * p.late_rate)


def time_change(params: LimitParams, t: float) -> float:
    """Coalescent time u matching t = 2 nu * raw time."""
    p = params
    L2 = p.L**2
    if t < p.L ** (2 * p.beta) * (1 - 1e-12):
        raise ValueError(f"t={t} lies below L^(2 beta)")
    if t <= L2:
        g = max(math.log(t) / (2 * p.log_L), p.beta)
        return math.log((p.alpha + g) / (p.alpha + p.beta))
    return p.u1 + (t - L2) * p.late_rate


def time_change_inv(params: LimitParams, u: float) -> float:
    """Inverse of :func:`time_change`."""
    p = params
    if u < 0:
        raise ValueError("u must be >= 0")
    if u <= p.u1:
        return math.exp(((p.alpha + p.beta) * math.exp(u) - p.alpha) * 2 * p.log_L)
    return p.L**2 + (u - p.u1) / p.late_rate


def thm3_pmf(n: int, k: int, beta: float, gamma: float, alpha: float) -> float:
    """Limit law of the lineage count at L^{2 gamma}/(2 nu) for a clustered sample."""
    if not 0 < beta <= gamma <= 1:
        raise ValueError(f"need 0 < beta <= gamma <= 1, got beta={beta}, gamma={gamma}")
    return kingman_pmf(n, k, math.log((gamma + alpha) / (beta + alpha)))


def effective_size(L: float, N: float, nu: float, sigma2: float) -> dict:
    """Effective population size, exact form and the N L^2 (1+a)/(2a) approximation.

    The approximate form (and its factor) is omitted when alpha is 0.
    """
    a = alpha_value(L, N, nu, sigma2)
    exact = (1 + a) * L**2 * math.log(L) / (4 * math.pi * sigma2 * nu)
    out = {"alpha": a, "exact": exact}
    if a > 0:
        factor = (1 + a) / (2 * a)
        out.update(factor=factor, approx=N * L**2 * factor)
    return out


def model_effective_size(params: ModelParams) -> dict:
    return effective_size(params.L, params.N, params.nu, params.sigma2)


def partition_pair_fraction(partition: Sequence[int]) -> float:
    """Fraction of sampled pairs that fall in a common block."""
    blocks = list(partition)
    if not blocks:
        raise ValueError("empty partition")
    if any(b <= 0 for b in blocks):
        raise ValueError("block sizes must be positive")
    n = sum(blocks)
    if n < 2:
        raise ValueError("need at least two sampled items")
    return sum(b * (b - 1) for b in blocks) / (n * (n - 1))


def expected_time_to_k(n: int, k: int) -> float:
    """Mean coalescent time for n lineages to fall to k, i.e. 2/k - 2/n."""
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= k < n, got n={n}, k={k}")
    return 2 / k - 2 / n


# -- exact finite-L pair chain ---------------------------------------------


def _pair_generator(params: ModelParams) -> scipy.sparse.csr_matrix:
    """Sub-generator of the difference chain of two lineages, absorbing on merge.

    State index (d1 mod L) * L + (d2 mod L); state 0 means same colony,
    different slots.
    """
    L = params.L
    full = {(0, 0): 1 - params.nu}
    for z, q in params.kernel.as_table().items():
        full[z] = full.get(z, 0.0) + params.nu * q
    miss = 1 - 1 / params.slots
    rows, cols, vals = [], [], []
    for a in range(L):
        for b in range(L):
            i = a * L + b
            rows.append(i)
            cols.append(i)
            vals.append(-2.0)
            for (dx, dy), q in full.items():
                j = ((a + dx) % L) * L + (b + dy) % L
                rows.append(i)
                cols.append(j)
                vals.append(2 * q * (miss if j == 0 else 1.0))
    return scipy.sparse.csr_matrix((vals, (rows, cols)), shape=(L * L, L * L))


def pair_survival_exact(params: ModelParams, starts: Iterable[Sequence[int]],
                        times: Sequence[float]) -> np.ndarray:
    """Exact finite-L P_x(t0 > t) for two lineages in distinct colonies.

    Returns an array of shape (len(times), len(starts)) with raw times.  Cost
    grows like L^2 per unit time, so this is meant for L up to about 100.
    """
    L = params.L
    Q = _pair_generator(params)
    idx = []
    for x in starts:
        w = wrap(x, L)
        if w == (0, 0):
            raise ValueError("starting colonies must differ")
        idx.append((w[0] % L) * L + w[1] % L)
    order = np.argsort(times)
    out = np.empty((len(times), len(idx)))
    v = np.ones(L * L)
    prev = 0.0
    for o in order:
        t = float(times[o])
        if t > prev:
            v = expm_multiply(Q * (t - prev), v)
        prev = t
        out[o] = v[idx]
    return out
