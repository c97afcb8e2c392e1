import numpy as np
import pytest

from colony_lab.experiments import (
    TrainingConfig,
    error_curve,
    improvement_vs_stage,
    paired_separation,
    scale_sweep,
    stage_analysis,
    survival_scenarios,
    train_population,
)
from colony_lab.population import (
    ContributorSet,
    tv_distance,
    uniform_grid,
)
from colony_lab.seeding import child_seed

TINY = dict(t_max=40, max_graphs=4, eq_window=3, eq_tv=1e-9)


def tiny_cfg(n=12, **kw):
    merged = {**TINY, **kw}
    return TrainingConfig(n=n, **merged)


class TestTrainPopulation:
    def test_zero_budget_returns_uniform_unchanged(self):
        res = train_population(TrainingConfig(n=20, max_graphs=0), seed=1)
        assert res.graphs_used == 0
        assert not res.converged
        assert np.array_equal(res.grid.weights, uniform_grid().weights)

    def test_all_filtered_contributors_leave_grid_unchanged(self):
        # late-only filtering with a colony capped below the split: n_c = 0
        cfg = tiny_cfg(survival="late-only", survival_t_split=50, t_max=30)
        res = train_population(cfg, seed=2)
        assert np.array_equal(res.grid.weights, uniform_grid().weights)
        assert res.n_c_per_graph.tolist() == [0] * res.graphs_used

    def test_single_iteration_graphs_contribute_the_leader(self):
        # at t_max=1 each graph records exactly the iteration-best ant
        cfg = tiny_cfg(t_max=1, max_graphs=3)
        res = train_population(cfg, seed=3)
        assert res.n_c_per_graph.tolist() == [1, 1, 1]
        assert tv_distance(res.grid, uniform_grid()) > 0
        assert np.all(res.contributors.t == 1)
        assert np.all(res.contributors.improvement == 0.0)

    def test_training_is_deterministic(self):
        cfg = tiny_cfg()
        a = train_population(cfg, seed=4)
        b = train_population(cfg, seed=4)
        assert np.array_equal(a.grid.weights, b.grid.weights)
        assert np.array_equal(a.n_c_per_graph, b.n_c_per_graph)
        c = train_population(cfg, seed=5)
        assert not np.array_equal(a.grid.weights, c.grid.weights)

    def test_early_only_caps_iterations(self):
        cfg = tiny_cfg(survival="early-only", survival_t_split=10, t_max=40)
        res = train_population(cfg, seed=6)
        assert res.contributors.t.max() <= 10

    def test_late_only_filters_contributions(self):
        cfg = tiny_cfg(n=20, survival="late-only", survival_t_split=3, t_max=40)
        res = train_population(cfg, seed=7)
        assert len(res.contributors) > 0
        assert res.contributors.t.min() > 3

    def test_staged_training_updates_buckets(self):
        bounds = ((1, 5), (6, 20), (21, 40))
        cfg = tiny_cfg(staged=True, stage_bounds=bounds)
        res = train_population(cfg, seed=8)
        assert res.grid is None
        assert len(res.buckets.grids) == 3
        counts = res.bucket_contributor_counts()
        assert counts.sum() == len(res.contributors)
        # the newly-proposed bucket always catches the t=1 leader
        assert counts[0] >= res.graphs_used

    def test_staged_bounds_must_match_t_max(self):
        with pytest.raises(ValueError):
            tiny_cfg(staged=True, stage_bounds=((1, 5), (6, 99)))

    def test_warm_start_from_grid(self):
        cfg = tiny_cfg()
        first = train_population(cfg, seed=9)
        warm = train_population(cfg, seed=10, warm_start=first.grid)
        assert not np.array_equal(warm.grid.weights, first.grid.weights)

    def test_unknown_survival_rejected(self):
        with pytest.raises(ValueError):
            tiny_cfg(survival="publish-or-perish")


class TestErrorCurve:
    def test_exact_reference_gives_nonnegative_nonincreasing_eps(self):
        grid = uniform_grid()
        curve = error_curve(grid, n=12, n_graphs=3, t_max=30, seed=11)
        assert curve.meta["reference_method"] == "held-karp"
        assert np.all(curve.eps >= -1e-12)
        assert np.all(np.diff(curve.eps, axis=1) <= 1e-15)

    def test_more_communities_never_worse_pointwise(self):
        grid = uniform_grid()
        k1 = error_curve(grid, n=12, n_graphs=3, t_max=25, seed=12, communities=1)
        k2 = error_curve(grid, n=12, n_graphs=3, t_max=25, seed=12, communities=2)
        assert np.all(k2.eps <= k1.eps + 1e-15)
        # community 0 runs are shared, so k=1 equals the first community
        assert k1.eps.shape == k2.eps.shape

    def test_workers_do_not_change_results(self):
        grid = uniform_grid()
        a = error_curve(grid, n=12, n_graphs=4, t_max=20, seed=13, workers=1)
        b = error_curve(grid, n=12, n_graphs=4, t_max=20, seed=13, workers=3)
        assert np.array_equal(a.eps, b.eps)
        assert np.array_equal(a.refs, b.refs)

    def test_speedup_lowers_or_matches_error(self):
        grid = uniform_grid()
        plain = error_curve(grid, n=12, n_graphs=3, t_max=20, seed=14)
        speed = error_curve(grid, n=12, n_graphs=3, t_max=20, seed=14, speedup=True)
        assert speed.final().mean() <= plain.final().mean() + 1e-12

    def test_argument_validation(self):
        with pytest.raises(ValueError):
            error_curve(uniform_grid(), n=12, n_graphs=0, t_max=5, seed=1)
        with pytest.raises(ValueError):
            error_curve(uniform_grid(), n=12, n_graphs=1, t_max=5, seed=1, communities=0)


class TestPairedSeparation:
    def test_positive_when_a_above_b(self):
        rng = np.random.default_rng(0)
        b = rng.random(40)
        a = b + 0.5 + 0.01 * rng.random(40)
        assert paired_separation(a, b) > 10

    def test_zero_mean_gives_small_separation(self):
        rng = np.random.default_rng(1)
        a = rng.random(40)
        assert abs(paired_separation(a, a + 0.0)) == 0.0


class TestScaleSweep:
    def test_single_size_matches_direct_training(self):
        base = tiny_cfg()
        sweep = scale_sweep([12], seed=21, base=base)
        direct = train_population(base, child_seed(21, 0, 12))
        assert np.array_equal(sweep[0].result.grid.weights, direct.grid.weights)
        assert sweep[0].summary.mean_alpha == pytest.approx(
            float(direct.grid.weights.sum(axis=1) @ direct.grid.alpha_axis)
        )

    def test_sizes_keyed_independently(self):
        base = tiny_cfg()
        both = scale_sweep([12, 15], seed=22, base=base, workers=2)
        only15 = scale_sweep([15], seed=22, base=base)
        assert np.array_equal(both[1].result.grid.weights, only15[0].result.grid.weights)

    def test_empty_sizes_rejected(self):
        with pytest.raises(ValueError):
            scale_sweep([], seed=1)


class TestStageAnalysis:
    def test_per_bucket_summaries_and_union(self):
        bounds = ((1, 5), (6, 20), (21, 40))
        cfg = tiny_cfg(staged=True, stage_bounds=bounds, max_graphs=6)
        plain = uniform_grid()
        staged = train_population(cfg, seed=23, warm_start=plain)
        analysis = stage_analysis(staged, plain_grid=plain)
        assert len(analysis.summaries) == 3
        assert analysis.labels == ["t1-5", "t6-20", "t21-40"]
        assert analysis.union_tv_vs_plain is not None
        assert 0 <= analysis.union_tv_vs_plain <= 1
        rows = analysis.scatter_rows(staged.buckets)
        assert all(len(r) == 4 for r in rows)

    def test_requires_staged_result(self):
        res = train_population(tiny_cfg(), seed=24)
        with pytest.raises(ValueError):
            stage_analysis(res)


class TestImprovementVsStage:
    def test_buckets_and_flags(self):
        contribs = ContributorSet(
            alpha=np.ones(6),
            beta=np.ones(6),
            t=np.array([1, 2, 3, 10, 40, 200]),
            improvement=np.array([0.0, 0.3, 0.2, 0.1, 0.05, 0.01]),
        )
        stage = improvement_vs_stage(contribs)
        assert stage.counts.tolist() == [3, 1, 1, 1]
        assert stage.mean_improvement[0] == pytest.approx(0.5 / 3)
        assert stage.non_increasing

    def test_improvements_bounded(self):
        res = train_population(tiny_cfg(max_graphs=3), seed=25)
        imp = res.contributors.improvement
        assert np.all((imp >= 0) & (imp < 1))


class TestSurvivalScenarios:
    def test_tiny_end_to_end(self):
        scenario = survival_scenarios(
            n=12,
            seed=26,
            train_cfg=tiny_cfg(max_graphs=3, survival_t_split=3),
            late_t_max=60,
            eval_graphs=2,
            eval_t_max=50,
        )
        assert set(scenario.trainings) == {"normal", "early-only", "late-only"}
        assert set(scenario.curves) == {"normal", "early-only", "late-only", "early-decay"}
        for curve in scenario.curves.values():
            assert curve.t_max == 50
            assert curve.n_graphs == 2
            assert np.all(np.diff(curve.eps, axis=1) <= 1e-15)
        assert set(scenario.checks) == {
            "early_beats_normal_at_t25",
            "normal_beats_early_at_end",
            "decay_worse_than_normal_paired",
            "improvement_non_increasing",
        }
        # late-only training ran the colony to full t but filtered records
        late = scenario.trainings["late-only"].contributors
        if len(late):
            assert late.t.min() > 3
        # early-only training never ran past the split
        early = scenario.trainings["early-only"].contributors
        assert early.t.max() <= 3
