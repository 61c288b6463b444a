import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from stepstone.genealogy import (GenealogyTree, first_coalescing_pair, first_pair_counts,
                                 lineage_count_at, lineage_count_samples, pair_coalescence_times,
                                 pair_time_survival, simulate_genealogy, write_tree_csv)
from stepstone.lattice import nearest4, uniform_box
from stepstone.model import (InfeasibleGeometry, LineageState, ModelParams, SampleGeometry,
                             make_sample, pairwise_distances)
from stepstone.theory import pair_survival_exact


def _ls(x, y, i):
    return LineageState((x, y), i)


class TestModelParams:
    def test_derived_quantities(self):
        p = ModelParams(100, 5, 0.2, uniform_box(2))
        assert p.slots == 10
        assert p.alpha == pytest.approx(2 * 5 * 0.2 * math.pi * (50 / 24) / math.log(100))
        assert p.N_e == pytest.approx(p.h_L / 2)
        assert p.kappa_L == pytest.approx(1 - 2 * math.log(math.log(100)) / math.log(100))

    @pytest.mark.parametrize("kwargs", [
        dict(L=100, N=0, nu=0.2), dict(L=100, N=5, nu=0.0), dict(L=100, N=5, nu=1.5),
        dict(L=3, N=5, nu=0.2, kernel=uniform_box(2)),
    ])
    def test_rejects(self, kwargs):
        kwargs.setdefault("kernel", nearest4())
        with pytest.raises(ValueError):
            ModelParams(**kwargs)


class TestMakeSample:
    def test_spread_distances(self, rng):
        p = ModelParams(100, 5, 0.2, nearest4())
        for _ in range(20):
            s = make_sample(p, SampleGeometry("spread", 4), rng)
            assert min(pairwise_distances([x.colony for x in s], 100)) >= 100 / math.log(100)

    def test_clustered_window(self, rng):
        p = ModelParams(100, 5, 0.2, nearest4())
        g = SampleGeometry("clustered", 2, 1.0, 0.4)
        lo, hi = g.window(100)
        assert lo == pytest.approx(1.37, abs=5e-3) and hi == pytest.approx(11.6, abs=0.05)
        for _ in range(50):
            s = make_sample(p, g, rng)
            d = pairwise_distances([x.colony for x in s], 100)[0]
            assert lo < d < hi
            assert all(0 <= x.individual < 10 for x in s)

    def test_empty_window(self, rng):
        p = ModelParams(10, 1, 0.5, nearest4())
        g = SampleGeometry("clustered", 2, 0.01, 0.1)
        with pytest.raises(InfeasibleGeometry, match="window"):
            make_sample(p, g, rng)

    def test_spread_too_many_points(self, rng):
        p = ModelParams(4, 1, 0.5, nearest4())
        with pytest.raises(InfeasibleGeometry):
            make_sample(p, SampleGeometry("spread", 20), rng)


class TestSimulate:
    def test_single_lineage(self, small_model, rng):
        tree = simulate_genealogy(small_model, [_ls(0, 0, 0)], None, rng)
        assert tree.root_reached and tree.n_merges == 0
        assert lineage_count_at(tree, 0.0) == 1
        assert first_coalescing_pair(tree) is None

    def test_pair_gives_pair(self, small_model, rng):
        tree = simulate_genealogy(small_model, [_ls(0, 0, 0), _ls(1, 0, 1)], None, rng)
        assert first_coalescing_pair(tree) == frozenset({0, 1})

    def test_rejects_shared_slot(self, small_model, rng):
        with pytest.raises(ValueError):
            simulate_genealogy(small_model, [_ls(0, 0, 0), _ls(0, 0, 0)], None, rng)

    def test_censored_tree(self, small_model, rng):
        tree = simulate_genealogy(small_model, [_ls(0, 0, 0), _ls(10, 10, 1)], 1e-6, rng)
        assert not tree.root_reached
        assert first_coalescing_pair(tree) is None

    @settings(max_examples=25, deadline=None)
    @given(st.integers(2, 7), st.integers(0, 2**32 - 1))
    def test_merge_structure(self, n, seed):
        p = ModelParams(8, 1, 0.7, nearest4())
        rng = np.random.default_rng(seed)
        sample = make_sample(p, SampleGeometry("spread", 1), rng)
        taken = {(sample[0].colony, sample[0].individual)}
        while len(sample) < n:
            c = tuple(int(v) for v in rng.integers(-3, 5, size=2))
            i = int(rng.integers(2))
            if (c, i) not in taken:
                taken.add((c, i))
                sample.append(_ls(*c, i))
        tree = simulate_genealogy(p, sample, None, rng)
        assert tree.root_reached and tree.n_merges == n - 1
        assert np.all(np.diff(tree.merge_times) > 0)
        counts = [lineage_count_at(tree, t) for t in np.linspace(0, tree.merge_times[-1] * 1.1, 50)]
        assert all(a >= b for a, b in zip(counts, counts[1:]))
        assert lineage_count_at(tree, tree.merge_times[-1]) == 1
        for j, t in enumerate(tree.merge_times):
            assert lineage_count_at(tree, t) == n - j - 1
            if j + 1 < n - 1:
                mid = (t + tree.merge_times[j + 1]) / 2
                assert lineage_count_at(tree, mid) == n - j - 1
        # every node is used exactly once as a child, except the root
        kids = tree.merge_children.ravel()
        assert sorted(kids) == list(range(2 * n - 2))
        assert tree.leaves_below()[-1] == frozenset(range(n))

    def test_co_colony_merge_probability(self):
        p = ModelParams(4, 3, 0.3, nearest4())
        rng = np.random.default_rng(5)
        landed = merged = 0
        for _ in range(3000):
            tree = simulate_genealogy(p, [_ls(0, 0, 0), _ls(0, 0, 1)], None, rng, trace=100000)
            landed += int(tree.trace[:, 3].sum())
            merged += int(tree.trace[:, 4].sum())
        assert merged == 3000
        assert stats.binomtest(merged, landed, 1 / 6).pvalue > 1e-3

    def test_marginal_displacements_follow_full_kernel(self):
        p = ModelParams(30, 50, 0.4, nearest4())
        rng = np.random.default_rng(6)
        steps = []
        for _ in range(400):
            tree = simulate_genealogy(p, [_ls(0, 0, 0), _ls(15, 15, 0)], 200.0, rng, trace=100000)
            steps.append(tree.trace[tree.trace[:, 4] == 0][:, 1:3])
        steps = np.vstack(steps)
        keys = [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)]
        counts = np.array([np.sum(np.all(steps == k, axis=1)) for k in keys])
        assert counts.sum() == len(steps)
        expected = len(steps) * np.array([0.6, 0.1, 0.1, 0.1, 0.1])
        assert stats.chisquare(counts, expected).pvalue > 1e-3

    def test_pair_survival_matches_exact_chain(self):
        p = ModelParams(12, 1, 0.5, nearest4())
        geom = SampleGeometry("clustered", 2, 1.0, 0.5)
        horizon = 150.0
        t0 = pair_coalescence_times(p, geom, horizon, 4000, seed=9)
        # the exact chain averaged over the sample's start distribution
        rng = np.random.default_rng(0)
        starts = [make_sample(p, geom, rng) for _ in range(4000)]
        diffs = [(b.colony[0] - a.colony[0], b.colony[1] - a.colony[1]) for a, b in starts]
        uniq, inv = np.unique(np.array(diffs), axis=0, return_inverse=True)
        exact = pair_survival_exact(p, [tuple(u) for u in uniq], [30.0, horizon])
        for row, h in zip(exact, [30.0, horizon]):
            want = float(row[inv.ravel()].mean())
            got = float(np.mean(t0 > h))
            assert abs(got - want) < 4 * math.sqrt(want * (1 - want) / 4000) + 0.005


class TestDrivers:
    def test_pair_time_survival_gamma_equals_beta(self):
        p = ModelParams(50, 2, 0.5, nearest4())
        est, se = pair_time_survival(p, SampleGeometry("clustered", 2, 1.0, 0.6), 0.6, 2000, seed=1)
        assert est > 0.9

    def test_pair_time_survival_monotone(self):
        p = ModelParams(30, 1, 0.5, nearest4())
        g = SampleGeometry("clustered", 2, 1.0, 0.5)
        ests = [pair_time_survival(p, g, gm, 2000, seed=3) for gm in (0.5, 0.75, 1.0)]
        for (a, sa), (b, sb) in zip(ests, ests[1:]):
            assert b <= a + 3 * math.hypot(sa, sb)

    def test_lineage_counts_shape(self):
        p = ModelParams(20, 1, 1.0, nearest4())
        c = lineage_count_samples(p, SampleGeometry("spread", 3), [0.0, 10.0, 1e4], 50, seed=2)
        assert c.shape == (50, 3)
        assert np.all(c[:, 0] == 3)
        assert np.all(np.diff(c, axis=1) <= 0)

    def test_first_pair_counts_total(self):
        p = ModelParams(20, 1, 1.0, nearest4())
        c = first_pair_counts(p, SampleGeometry("spread", 3), 60, seed=4)
        assert sum(c.values()) == 60 and set(c) == {(0, 1), (0, 2), (1, 2)}

    def test_workers_do_not_change_results(self):
        p = ModelParams(20, 1, 1.0, nearest4())
        g = SampleGeometry("spread", 2)
        a = pair_coalescence_times(p, g, 500.0, 40, seed=11, workers=1)
        b = pair_coalescence_times(p, g, 500.0, 40, seed=11, workers=2)
        assert np.array_equal(a, b)


def test_tree_csv(tmp_path, small_model, rng):
    sample = [_ls(0, 0, 0), _ls(5, 5, 1), _ls(-5, 3, 2)]
    tree = simulate_genealogy(small_model, sample, None, rng)
    path = tmp_path / "tree.csv"
    write_tree_csv(tree, path, small_model.h_L)
    rows = list(csv.DictReader(open(path)))
    assert list(rows[0]) == ["merge_index", "time_raw", "time_scaled_by_hL", "child_a", "child_b",
                             "colony_x", "colony_y"]
    assert len(rows) == 2
    assert float(rows[1]["time_raw"]) == tree.merge_times[1]
    assert float(rows[0]["time_scaled_by_hL"]) == pytest.approx(tree.merge_times[0] / small_model.h_L)
