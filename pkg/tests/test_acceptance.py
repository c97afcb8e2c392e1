"""End-to-end acceptance checks.

Each test prints one PASS/FAIL line with the measured values. The heavy
trainings are shared artifacts (see artifacts.py) cached on disk between
sessions; evaluation curves are recomputed quickly from the reference
cache. Expected runtime from a cold cache is one to two hours; warm, a
few minutes.
"""

import time

import numpy as np

import artifacts
from artifacts import (
    TRAIN_SEEDS,
    child,
    early_only_result,
    grid100,
    plain_pair,
    reference_cache,
    staged_result,
)
from oracles import brute_force_optimum, improving_pair_exists
from colony_lab.cli import main as cli_main
from colony_lab.engine import AntsDecay
from colony_lab.experiments import error_curve, paired_separation, stage_analysis
from colony_lab.localsearch import descend_order
from colony_lab.population import (
    ContributorSet,
    ParamGrid,
    empirical_distribution,
    evolve,
    summarize,
    tv_distance,
)
from colony_lab.seeding import substream
from colony_lab.tsp import RegionSpec, exact_optimum, generate_instance, random_tour


def report(name: str, ok: bool, detail: str) -> None:
    print(f"[acceptance] {name}: {'PASS' if ok else 'FAIL'} ({detail})")


class TestExactSolverOracle:
    def test_dynamic_program_matches_enumeration(self):
        t0 = time.time()
        rng = substream(1001, 0)
        worst = 0.0
        for k in range(100):
            n = int(rng.integers(5, 10))
            inst = generate_instance(n, RegionSpec(), seed=int(rng.integers(1 << 48)))
            _, dp_len = exact_optimum(inst)
            bf_len = brute_force_optimum(inst.dist)
            worst = max(worst, abs(dp_len - bf_len))
        elapsed = time.time() - t0
        ok = worst <= 1e-9 and elapsed < 60
        report(
            "exact-solver-vs-enumeration",
            ok,
            f"100 instances n in [5,9], max deviation {worst:.2e}, {elapsed:.1f}s",
        )
        assert worst <= 1e-9
        assert elapsed < 60


class TestSegmentReversalDescent:
    def test_monotone_and_exhaustively_irreducible(self):
        t0 = time.time()
        rng = substream(1002, 0)
        for k in range(100):
            inst = generate_instance(50, RegionSpec(), seed=int(rng.integers(1 << 48)))
            start = random_tour(inst, rng)
            out, out_len = descend_order(inst, start.order)
            assert out_len <= start.length + 1e-12
            assert not improving_pair_exists(inst.dist, out)
        elapsed = time.time() - t0
        ok = elapsed < 60
        report(
            "segment-reversal-fixpoint",
            ok,
            f"100 instances n=50, no improving pair remains, {elapsed:.1f}s",
        )
        assert elapsed < 60


class TestGreedyScaling:
    def test_root_n_growth_vs_linear_random(self):
        t0 = time.time()
        means = {}
        rand_means = {}
        for n in (100, 400):
            nn_lengths = []
            rnd_lengths = []
            for k in range(50):
                inst = generate_instance(n, RegionSpec(), seed=child(1003, n * 1000 + k))
                rng = substream(1003, 1, n, k)
                from colony_lab.tsp import nearest_neighbor_tour

                nn_lengths.append(nearest_neighbor_tour(inst, 0).length)
                rnd_lengths.append(random_tour(inst, rng).length)
            means[n] = float(np.mean(nn_lengths))
            rand_means[n] = float(np.mean(rnd_lengths))
        greedy_ratio = means[400] / means[100]
        random_ratio = rand_means[400] / rand_means[100]
        elapsed = time.time() - t0
        ok = 1.6 <= greedy_ratio <= 2.4 and 3.5 <= random_ratio <= 4.5 and elapsed < 60
        report(
            "greedy-scaling",
            ok,
            f"greedy ratio {greedy_ratio:.3f} in [1.6,2.4], "
            f"random ratio {random_ratio:.3f} in [3.5,4.5], {elapsed:.1f}s",
        )
        assert 1.6 <= greedy_ratio <= 2.4
        assert 3.5 <= random_ratio <= 4.5
        assert elapsed < 60


class TestAlphaShiftWithProblemScale:
    def test_mean_alpha_rises_from_n20_to_n100(self):
        shifts = {}
        for seed in TRAIN_SEEDS:
            pair = plain_pair(seed)
            mean20 = summarize(pair[20].grid).mean_alpha
            mean100 = summarize(pair[100].grid).mean_alpha
            shifts[seed] = mean100 - mean20
        ok = all(v > 0.2 for v in shifts.values())
        report(
            "alpha-shift",
            ok,
            "; ".join(f"seed {s}: +{v:.3f}" for s, v in shifts.items()) + " (need > 0.2 each)",
        )
        for seed, shift in shifts.items():
            assert shift > 0.2, f"seed {seed}: alpha shift {shift:.3f} <= 0.2"


class TestResidualErrorBands:
    def test_final_error_with_and_without_walk_improvement(self):
        cache = reference_cache()
        grid = grid100()
        kw = dict(
            n=100, n_graphs=50, t_max=1000, seed=child(1005, 0),
            cache=cache, workers=artifacts.WORKERS,
        )
        plain = error_curve(grid, speedup=False, **kw)
        speed = error_curve(grid, speedup=True, **kw)
        cache.save()
        eps_plain = float(plain.final().mean())
        eps_speed = float(speed.final().mean())
        paired_lower = bool(np.mean(speed.final() - plain.final()) < 0)
        ok = (
            0.003 <= eps_plain <= 0.030
            and 0.0002 <= eps_speed <= 0.012
            and paired_lower
        )
        report(
            "residual-error-bands",
            ok,
            f"plain {100*eps_plain:.3f}% in [0.3,3.0], "
            f"improved {100*eps_speed:.3f}% in [0.02,1.2], paired lower: {paired_lower}",
        )
        assert 0.003 <= eps_plain <= 0.030
        assert 0.0002 <= eps_speed <= 0.012
        assert paired_lower


class TestIndependentCommunities:
    def test_two_communities_beat_one(self):
        cache = reference_cache()
        grid = grid100()
        kw = dict(
            n=100, n_graphs=100, t_max=1000, seed=child(1006, 0),
            cache=cache, workers=artifacts.WORKERS,
        )
        single = error_curve(grid, communities=1, **kw)
        double = error_curve(grid, communities=2, **kw)
        cache.save()
        separation = paired_separation(single.final(), double.final())
        lower = float(double.final().mean()) < float(single.final().mean())
        ok = lower and separation >= 2.0
        report(
            "independent-communities",
            ok,
            f"k=1 {100*single.final().mean():.3f}% vs k=2 {100*double.final().mean():.3f}%, "
            f"paired separation {separation:.2f} (need >= 2)",
        )
        assert lower
        assert separation >= 2.0


class TestStageOrdering:
    def test_newly_proposed_bucket_has_higher_beta(self):
        staged = staged_result()
        analysis = stage_analysis(staged, plain_grid=grid100())
        newest = analysis.summaries[0].mean_beta
        oldest = analysis.summaries[-1].mean_beta
        gap = newest - oldest
        ok = gap > 0.2
        report(
            "stage-ordering",
            ok,
            f"mean beta t1-5 {newest:.3f} vs t101-1000 {oldest:.3f}, gap {gap:.3f} (need > 0.2)",
        )
        assert gap > 0.2


class TestHastyResearchPenalty:
    def test_decaying_workforce_costs_accuracy(self):
        cache = reference_cache()
        normal_grid = grid100()
        early_grid = early_only_result().grid
        kw = dict(
            n=100, n_graphs=50, t_max=1000, seed=child(1008, 0),
            cache=cache, workers=artifacts.WORKERS,
        )
        normal = error_curve(normal_grid, **kw)
        early = error_curve(early_grid, **kw)
        decay = error_curve(early_grid, colony_overrides={"decay": AntsDecay()}, **kw)
        cache.save()
        eps_decay = float(decay.final().mean())
        decay_worse = bool(np.mean(decay.final() - normal.final()) > 0)
        early_wins_start = float(early.at(25).mean()) < float(normal.at(25).mean())
        ok = 0.01 <= eps_decay <= 0.04 and decay_worse and early_wins_start
        report(
            "hasty-research-penalty",
            ok,
            f"decay {100*eps_decay:.3f}% in [1,4], worse than normal: {decay_worse}, "
            f"early wins at t=25: {early_wins_start} "
            f"(early {100*early.at(25).mean():.2f}% vs normal {100*normal.at(25).mean():.2f}%)",
        )
        assert 0.01 <= eps_decay <= 0.04
        assert decay_worse
        assert early_wins_start


class TestEvolutionIdentities:
    def test_convex_mix_properties(self):
        rng = substream(1009, 0)
        worst = 0.0
        for trial in range(25):
            w = rng.random((51, 51)) ** 2
            grid = ParamGrid(w / w.sum())
            n_c = int(rng.integers(1, 400))
            contribs = ContributorSet(
                alpha=rng.random(n_c) * 5,
                beta=rng.random(n_c) * 5,
                t=np.ones(n_c, dtype=np.int64),
                improvement=np.zeros(n_c),
            )
            # identity at zero contributors
            assert evolve(grid, ContributorSet.empty(), 4000) is grid
            # full replacement at n_c = M
            full = evolve(grid, contribs, pool_size=n_c)
            emp = empirical_distribution(grid, contribs)
            worst = max(worst, np.abs(full.weights - emp.weights).max())
            # exact contraction factor toward the contributor distribution
            mixed = evolve(grid, contribs, 4000)
            target = (1 - n_c / 4000) * tv_distance(grid, emp)
            worst = max(worst, abs(tv_distance(mixed, emp) - target))
        ok = worst <= 1e-9
        report("evolution-identities", ok, f"25 random grids, max deviation {worst:.2e}")
        assert worst <= 1e-9


class TestPipelineDeterminism:
    def test_byte_identical_outputs_across_worker_counts(self, tmp_path, monkeypatch):
        def run(threads: int) -> dict[str, bytes]:
            out = tmp_path / f"threads{threads}"
            monkeypatch.setenv("COLONY_LAB_THREADS", str(threads))
            code = cli_main([
                "experiment", "communities", "--n", "30", "--t-max", "40",
                "--max-graphs", "5", "--eval-graphs", "4", "--eval-t-max", "60",
                "--restarts", "50", "--k", "2", "--seed", "77", "--out", str(out),
            ])
            assert code == 0
            return {p.name: p.read_bytes() for p in sorted(out.iterdir())}

        runs = {t: run(t) for t in (1, 4, 16)}
        same_14 = runs[1] == runs[4]
        same_116 = runs[1] == runs[16]
        ok = same_14 and same_116
        report(
            "pipeline-determinism",
            ok,
            f"outputs identical for 1/4 workers: {same_14}, 1/16 workers: {same_116}",
        )
        assert same_14 and same_116
