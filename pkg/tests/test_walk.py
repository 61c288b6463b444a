import math

import numpy as np
import pytest
from scipy import stats

from stepstone.lattice import FullKernel, nearest4, uniform_box
from stepstone.walk import (WalkConfig, hit_origin, hit_tail_asymptotic, hit_tail_estimate,
                            simulate_path, simulate_walk)


def test_zero_duration_returns_start(rng):
    assert simulate_walk(WalkConfig(nearest4()), (3, -7), 0.0, rng) == (3, -7)


def test_negative_duration_rejected(rng):
    with pytest.raises(ValueError):
        simulate_walk(WalkConfig(nearest4()), (0, 0), -1.0, rng)


def test_mean_squared_displacement(rng):
    cfg = WalkConfig(nearest4())
    ends = np.array([simulate_walk(cfg, (0, 0), 1e4, rng) for _ in range(10**4)])
    msd = (ends.astype(float) ** 2).mean(axis=0)
    assert np.all(np.abs(msd / 5000 - 1) < 0.03)


@pytest.mark.parametrize("kernel", [nearest4(), uniform_box(2)])
def test_torus_endpoints_wrapped(kernel, rng):
    cfg = WalkConfig(kernel, L=10)
    for _ in range(500):
        x, y = simulate_walk(cfg, (4, 5), 50.0, rng)
        assert -5 < x <= 5 and -5 < y <= 5


def test_torus_requires_room_for_kernel():
    with pytest.raises(ValueError):
        WalkConfig(uniform_box(3), L=5)


def test_jump_histogram_and_holding_times(rng):
    cfg = WalkConfig(nearest4())
    times, pos = simulate_path(cfg, (0, 0), 2e5, rng)
    steps = np.diff(np.vstack([[0, 0], pos]), axis=0)
    _, counts = np.unique(steps, axis=0, return_counts=True)
    assert len(counts) == 4
    assert stats.chisquare(counts).pvalue > 1e-3
    gaps = np.diff(np.concatenate([[0.0], times]))
    assert abs(gaps.mean() - 1.0) < 0.01


def test_full_kernel_path_is_lazy(rng):
    cfg = WalkConfig(FullKernel(nearest4(), 0.25))
    _, pos = simulate_path(cfg, (0, 0), 4e4, rng)
    steps = np.diff(np.vstack([[0, 0], pos]), axis=0)
    stay = np.mean(np.all(steps == 0, axis=1))
    assert abs(stay - 0.75) < 4 * math.sqrt(0.75 * 0.25 / len(steps))


def test_torus_walk_does_not_feel_the_torus():
    L = 100
    cfg = WalkConfig(nearest4(), L=L)
    dur = L**2 / math.log(L) ** 4
    rng = np.random.default_rng(3)
    far = 0
    for _ in range(2000):
        _, pos = simulate_path(cfg, (0, 0), dur, rng)
        if len(pos) and np.abs(pos).max() > L / 3:
            far += 1
    assert far / 2000 < 0.01


def test_hit_from_origin_is_immediate(rng):
    rec = hit_origin(WalkConfig(nearest4()), (0, 0), 10.0, rng)
    assert rec.hit and rec.time == 0.0 and rec.jumps == 0


def test_tiny_horizon_misses(rng):
    cfg = WalkConfig(nearest4())
    assert not any(hit_origin(cfg, (5, 5), 1e-9, rng).hit for _ in range(1000))


def test_hit_time_within_horizon(rng):
    cfg = WalkConfig(nearest4())
    for _ in range(500):
        rec = hit_origin(cfg, (1, 0), 50.0, rng)
        assert rec.jumps >= 0
        if rec.hit:
            assert 0 < rec.time <= 50.0


def test_hit_time_law_matches_direct_path_simulation():
    # an exact but slow reference: walk the path jump by jump
    cfg = WalkConfig(nearest4())
    rng = np.random.default_rng(8)
    fast = [hit_origin(cfg, (1, 0), 20.0, rng) for _ in range(4000)]
    slow = []
    for _ in range(4000):
        times, pos = simulate_path(cfg, (1, 0), 20.0, rng)
        at = np.flatnonzero(np.all(pos == 0, axis=1))
        slow.append(times[at[0]] if len(at) else math.inf)
    f = np.array([r.time if r.hit else math.inf for r in fast])
    s = np.array(slow)
    assert abs(np.isfinite(f).mean() - np.isfinite(s).mean()) < 0.04
    assert stats.ks_2samp(f[np.isfinite(f)], s[np.isfinite(s)]).pvalue > 1e-3


def test_tail_estimate_t_zero():
    assert hit_tail_estimate(WalkConfig(nearest4()), 0.0, 100, seed=1) == (1.0, 0.0)


def test_tail_estimate_monotone():
    cfg = WalkConfig(nearest4())
    p1, s1 = hit_tail_estimate(cfg, 1e2, 4000, seed=2)
    p2, s2 = hit_tail_estimate(cfg, 1e3, 4000, seed=2)
    assert p1 >= p2 - 3 * math.hypot(s1, s2)


def test_asymptotic_value():
    assert hit_tail_asymptotic(0.5, 1e5) == pytest.approx(0.2729, abs=1e-4)
