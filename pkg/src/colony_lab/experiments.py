"""Training runs, error curves, and the four study scenarios.

Seeding layout: every public function takes one seed and derives child
seeds by counter keys, never by sequential draws. Within a function,
namespace 0 is instance generation and namespace 1 is colony runs (keyed
by graph index, and community index where applicable), so adding
parallelism or reordering work cannot change any result. Graph-level work
is farmed to a process pool and folded back in graph order, making outputs
identical for any worker count.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .engine import AntsDecay, ColonyConfig, RunTrace, run_colony
from .localsearch import ReferenceCache, reference_key, reference_optimum
from .population import (
    DEFAULT_POOL_SIZE,
    DEFAULT_STAGE_BOUNDS,
    ContributorSet,
    GridSummary,
    ParamGrid,
    StageBuckets,
    evolve,
    evolve_staged,
    summarize,
    tv_distance,
    uniform_grid,
)
from .seeding import child_seed
from .tsp import RegionSpec, generate_instance

SURVIVAL_RULES = ("none", "early-only", "late-only", "decay")


@dataclass(frozen=True)
class TrainingConfig:
    n: int
    region: RegionSpec = field(default_factory=RegionSpec)
    t_max: int = 200
    max_graphs: int = 500
    eq_window: int = 50
    eq_tv: float = 0.02
    pool_size: int = DEFAULT_POOL_SIZE
    staged: bool = False
    stage_bounds: tuple[tuple[int, int], ...] = DEFAULT_STAGE_BOUNDS
    survival: str = "none"
    survival_t_split: int = 50
    speedup: bool = False
    n_ants: int = 50
    p_start: float = 50.0
    p_end: float = 8.0
    p_knee: int = 300
    background: float = 0.01

    def __post_init__(self) -> None:
        if self.survival not in SURVIVAL_RULES:
            raise ValueError(f"unknown survival rule: {self.survival!r}")
        if self.t_max < 1 or self.max_graphs < 0:
            raise ValueError("t_max must be >= 1 and max_graphs >= 0")
        if self.eq_window < 1 or self.eq_tv <= 0:
            raise ValueError("equilibrium window and threshold must be positive")
        if self.staged and self.stage_bounds[-1][1] != self.t_max:
            raise ValueError(
                "staged training needs buckets partitioning 1..t_max "
                f"(buckets end at {self.stage_bounds[-1][1]}, t_max={self.t_max})"
            )

    def colony_config(self) -> ColonyConfig:
        t_max = self.t_max
        decay = None
        if self.survival == "early-only":
            # the problem drops out of attention after the split iteration
            t_max = min(self.survival_t_split, self.t_max)
        elif self.survival == "decay":
            decay = AntsDecay(t_start=self.survival_t_split)
        return ColonyConfig(
            n_ants=self.n_ants,
            t_max=t_max,
            p_start=self.p_start,
            p_end=self.p_end,
            p_knee=self.p_knee,
            speedup=self.speedup,
            background=self.background,
            decay=decay,
        )


def contributors_from_trace(trace: RunTrace) -> ContributorSet:
    return ContributorSet(
        alpha=trace.contrib_alpha,
        beta=trace.contrib_beta,
        t=trace.contrib_t,
        improvement=trace.contrib_improvement,
    )


@dataclass
class TrainResult:
    grid: ParamGrid | None
    buckets: StageBuckets | None
    graphs_used: int
    converged: bool
    n_c_per_graph: np.ndarray
    tv_history: np.ndarray
    contributors: ContributorSet
    config: TrainingConfig
    seed: int

    @property
    def source(self) -> ParamGrid | StageBuckets:
        return self.buckets if self.buckets is not None else self.grid

    def bucket_contributor_counts(self) -> np.ndarray:
        if self.buckets is None:
            raise ValueError("not a staged training result")
        return np.array(
            [len(self.contributors.in_stage(lo, hi)) for lo, hi in self.buckets.bounds]
        )


def train_population(
    cfg: TrainingConfig,
    seed: int,
    warm_start: ParamGrid | StageBuckets | None = None,
    progress: Callable[[int, int], None] | None = None,
) -> TrainResult:
    """Evolve the parameter distribution over random graphs until equilibrium.

    Per graph: generate an instance, run the colony sampling from the
    frozen current distribution, filter contributors by the survival rule,
    apply the convex update, and stop once the TV distance between
    distributions eq_window graphs apart drops below eq_tv (or the graph
    budget runs out, flagged as not converged).
    """
    if cfg.staged:
        if isinstance(warm_start, StageBuckets):
            buckets = StageBuckets(
                grids=[g.copy() for g in warm_start.grids], bounds=warm_start.bounds
            )
        else:
            buckets = StageBuckets.from_grid(
                warm_start if warm_start is not None else uniform_grid(),
                bounds=cfg.stage_bounds,
            )
        grid = None
    else:
        if isinstance(warm_start, StageBuckets):
            raise ValueError("plain training cannot warm-start from stage buckets")
        grid = (warm_start or uniform_grid()).copy()
        buckets = None

    ccfg = cfg.colony_config()
    snapshots: list[np.ndarray] = [_weights_snapshot(grid, buckets)]
    n_c_log: list[int] = []
    tv_log: list[float] = []
    pooled: list[ContributorSet] = []
    converged = False
    graphs_used = 0

    for g in range(cfg.max_graphs):
        inst = generate_instance(cfg.n, cfg.region, child_seed(seed, 0, g))
        sampler = buckets.sampler() if cfg.staged else grid.sampler()
        trace = run_colony(inst, sampler, ccfg, child_seed(seed, 1, g))
        contribs = contributors_from_trace(trace)
        if cfg.survival == "late-only":
            contribs = contribs.select(contribs.t > cfg.survival_t_split)
        pooled.append(contribs)
        n_c_log.append(len(contribs))

        if cfg.staged:
            buckets = evolve_staged(buckets, contribs, cfg.pool_size)
        else:
            grid = evolve(grid, contribs, cfg.pool_size)
        graphs_used = g + 1
        snapshots.append(_weights_snapshot(grid, buckets))

        if len(snapshots) > cfg.eq_window:
            tv = _snapshot_tv(snapshots[-1], snapshots[-1 - cfg.eq_window])
            tv_log.append(tv)
            if tv < cfg.eq_tv:
                converged = True
        if progress is not None and graphs_used % 10 == 0:
            progress(graphs_used, cfg.max_graphs)
        if converged:
            break

    return TrainResult(
        grid=grid,
        buckets=buckets,
        graphs_used=graphs_used,
        converged=converged,
        n_c_per_graph=np.asarray(n_c_log, dtype=np.int64),
        tv_history=np.asarray(tv_log),
        contributors=ContributorSet.concatenate(pooled),
        config=cfg,
        seed=int(seed),
    )


def _weights_snapshot(grid: ParamGrid | None, buckets: StageBuckets | None) -> np.ndarray:
    if buckets is not None:
        return np.stack([g.weights for g in buckets.grids])
    return grid.weights.copy()


def _snapshot_tv(a: np.ndarray, b: np.ndarray) -> float:
    if a.ndim == 3:  # staged: settle only when every bucket has settled
        return max(
            0.5 * float(np.abs(ga - gb).sum()) for ga, gb in zip(a, b)
        )
    return 0.5 * float(np.abs(a - b).sum())


@dataclass
class ErrorCurve:
    """Relative-error curves: eps[g, t-1] = L_min(t) / L_ref - 1 on graph g."""

    eps: np.ndarray              # (n_graphs, t_max)
    refs: np.ndarray             # (n_graphs,) reference lengths
    communities: int
    speedup: bool
    meta: dict

    @property
    def n_graphs(self) -> int:
        return int(self.eps.shape[0])

    @property
    def t_max(self) -> int:
        return int(self.eps.shape[1])

    @property
    def mean(self) -> np.ndarray:
        return self.eps.mean(axis=0)

    @property
    def stderr(self) -> np.ndarray:
        if self.n_graphs < 2:
            return np.zeros(self.t_max)
        return self.eps.std(axis=0, ddof=1) / np.sqrt(self.n_graphs)

    def final(self) -> np.ndarray:
        return self.eps[:, -1]

    def at(self, t: int) -> np.ndarray:
        return self.eps[:, t - 1]


def _eval_graph_worker(args: tuple) -> tuple[int, np.ndarray]:
    """Run all communities on one graph; return (graph index, min best-known curve)."""
    g, inst, source, ccfg, run_seeds = args
    best = None
    for rs in run_seeds:
        trace = run_colony(inst, source.sampler(), ccfg, rs)
        best = trace.best_known if best is None else np.minimum(best, trace.best_known)
    return g, best


def _reference_worker(args: tuple) -> tuple[int, float]:
    g, inst, restarts, polish = args
    return g, reference_optimum(inst, restarts=restarts, polish=polish)


def _map_tasks(worker, tasks, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        return [worker(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(worker, tasks, chunksize=1))


def error_curve(
    source: ParamGrid | StageBuckets,
    n: int,
    n_graphs: int,
    t_max: int,
    seed: int,
    communities: int = 1,
    speedup: bool = False,
    region: RegionSpec | None = None,
    restarts: int = 500,
    cache: ReferenceCache | None = None,
    workers: int = 1,
    colony_overrides: dict | None = None,
) -> ErrorCurve:
    """Mean relative error vs iteration over fresh evaluation graphs.

    Per graph, `communities` independent colonies run and the shortest
    best-known length across them counts at every iteration. Graph g uses
    instance seed (seed, 0, g) and community c run seed (seed, 1, g, c),
    so a k=1 curve shares community 0's runs with a k=2 curve on the same
    seed (paired comparisons by construction).
    """
    if n_graphs < 1 or communities < 1:
        raise ValueError("n_graphs and communities must be >= 1")
    region = region or RegionSpec()
    overrides = dict(colony_overrides or {})
    ccfg = ColonyConfig(t_max=t_max, speedup=speedup, **overrides)

    instances = [
        generate_instance(n, region, child_seed(seed, 0, g)) for g in range(n_graphs)
    ]

    refs = np.empty(n_graphs)
    missing = []
    for g, inst in enumerate(instances):
        hit = cache.get(reference_key(inst, restarts)) if cache is not None else None
        if hit is None:
            missing.append((g, inst, restarts, True))
        else:
            refs[g] = hit
    for g, value in _map_tasks(_reference_worker, missing, workers):
        refs[g] = value
        if cache is not None:
            cache.put(reference_key(instances[g], restarts), value)
    if cache is not None:
        cache.save()

    tasks = [
        (
            g,
            instances[g],
            source,
            ccfg,
            [child_seed(seed, 1, g, c) for c in range(communities)],
        )
        for g in range(n_graphs)
    ]
    eps = np.empty((n_graphs, t_max))
    for g, curve in sorted(_map_tasks(_eval_graph_worker, tasks, workers)):
        eps[g] = curve / refs[g] - 1.0

    return ErrorCurve(
        eps=eps,
        refs=refs,
        communities=communities,
        speedup=speedup,
        meta={
            "n": n,
            "region": region.key(),
            "t_max": t_max,
            "n_graphs": n_graphs,
            "seed": int(seed),
            "restarts": restarts,
            "reference_method": "held-karp" if n <= 15 else "2opt-ms+ils30n",
        },
    )


def paired_separation(eps_a: np.ndarray, eps_b: np.ndarray) -> float:
    """Mean paired difference (a - b) in units of its standard error."""
    diff = eps_a - eps_b
    if diff.size < 2:
        return 0.0
    se = diff.std(ddof=1) / np.sqrt(diff.size)
    if se == 0.0:
        return np.inf if diff.mean() > 0 else 0.0
    return float(diff.mean() / se)


@dataclass
class SizeResult:
    n: int
    result: TrainResult
    summary: GridSummary


def _train_size_worker(args: tuple) -> tuple[int, TrainResult]:
    n, cfg, seed = args
    return n, train_population(cfg, seed)


def scale_sweep(
    sizes: list[int],
    seed: int,
    base: TrainingConfig | None = None,
    workers: int = 1,
) -> list[SizeResult]:
    """Train one population per instance size; summarize each equilibrium grid.

    Size n trains with child seed (seed, 0, n), so results for one size do
    not depend on which other sizes are requested.
    """
    if not sizes:
        raise ValueError("sizes must be nonempty")
    base = base or TrainingConfig(n=sizes[0])
    tasks = [(n, replace(base, n=n), child_seed(seed, 0, n)) for n in sizes]
    out = dict(_map_tasks(_train_size_worker, tasks, workers))
    return [SizeResult(n=n, result=out[n], summary=summarize(out[n].grid)) for n in sizes]


@dataclass
class StageAnalysis:
    labels: list[str]
    summaries: list[GridSummary]
    contributor_counts: np.ndarray
    beta_ordering_ok: bool          # mean beta: newest bucket > oldest bucket
    union_tv_vs_plain: float | None

    def scatter_rows(self, buckets: StageBuckets) -> list[tuple]:
        rows = []
        for label, grid in zip(self.labels, buckets.grids):
            ai, bi = np.nonzero(grid.weights)
            for a, b in zip(ai, bi):
                rows.append(
                    (
                        label,
                        float(grid.alpha_axis[a]),
                        float(grid.beta_axis[b]),
                        float(grid.weights[a, b]),
                    )
                )
        return rows


def stage_analysis(
    staged: TrainResult,
    plain_grid: ParamGrid | None = None,
) -> StageAnalysis:
    """Per-bucket statistics of a staged training result."""
    if staged.buckets is None:
        raise ValueError("stage_analysis needs a staged training result")
    buckets = staged.buckets
    summaries = [summarize(g) for g in buckets.grids]
    counts = staged.bucket_contributor_counts()

    union_tv = None
    if plain_grid is not None:
        weights = counts / counts.sum() if counts.sum() else np.full(len(counts), 1 / len(counts))
        union = np.tensordot(weights, np.stack([g.weights for g in buckets.grids]), axes=1)
        union_grid = ParamGrid(
            union / union.sum(), buckets.grids[0].alpha_axis, buckets.grids[0].beta_axis
        )
        union_tv = tv_distance(union_grid, plain_grid)

    return StageAnalysis(
        labels=buckets.labels(),
        summaries=summaries,
        contributor_counts=counts,
        beta_ordering_ok=summaries[0].mean_beta > summaries[-1].mean_beta,
        union_tv_vs_plain=union_tv,
    )


@dataclass
class StageImprovement:
    """Contributor improvement fractions grouped by problem stage."""

    bounds: tuple[tuple[int, int], ...]
    mean_improvement: np.ndarray
    counts: np.ndarray
    rows: ContributorSet

    @property
    def non_increasing(self) -> bool:
        present = self.counts > 0
        vals = self.mean_improvement[present]
        return bool(np.all(np.diff(vals) <= 1e-12))


def improvement_vs_stage(
    contributors: ContributorSet,
    bounds: tuple[tuple[int, int], ...] = DEFAULT_STAGE_BOUNDS,
) -> StageImprovement:
    means = np.zeros(len(bounds))
    counts = np.zeros(len(bounds), dtype=np.int64)
    for i, (lo, hi) in enumerate(bounds):
        sub = contributors.in_stage(lo, hi)
        counts[i] = len(sub)
        means[i] = sub.improvement.mean() if len(sub) else 0.0
    return StageImprovement(
        bounds=tuple(bounds), mean_improvement=means, counts=counts, rows=contributors
    )


@dataclass
class SurvivalScenario:
    trainings: dict[str, TrainResult]
    curves: dict[str, ErrorCurve]          # normal, early-only, late-only, early-decay
    improvement: StageImprovement
    checks: dict[str, bool]


def survival_scenarios(
    n: int,
    seed: int,
    region: RegionSpec | None = None,
    train_cfg: TrainingConfig | None = None,
    late_t_max: int = 1000,
    eval_graphs: int = 50,
    eval_t_max: int = 1000,
    restarts: int = 500,
    cache: ReferenceCache | None = None,
    workers: int = 1,
    progress: Callable[[str, int, int], None] | None = None,
) -> SurvivalScenario:
    """Train normal / early-only / late-only populations and compare error curves.

    The early-only grid is additionally evaluated with the decaying-workforce
    colony. All four arms share evaluation graphs and community run seeds.
    """
    region = region or RegionSpec()
    base = train_cfg or TrainingConfig(n=n, region=region)

    def report(stage):
        if progress is None:
            return None
        return lambda done, total: progress(stage, done, total)

    trainings = {
        "normal": train_population(replace(base, survival="none"), child_seed(seed, 0, 0), progress=report("train normal")),
        "early-only": train_population(replace(base, survival="early-only"), child_seed(seed, 0, 1), progress=report("train early-only")),
        "late-only": train_population(
            replace(base, survival="late-only", t_max=late_t_max),
            child_seed(seed, 0, 2),
            progress=report("train late-only"),
        ),
    }

    eval_seed = child_seed(seed, 1)
    curves: dict[str, ErrorCurve] = {}
    for name, grid_name, overrides in [
        ("normal", "normal", None),
        ("early-only", "early-only", None),
        ("late-only", "late-only", None),
        ("early-decay", "early-only", {"decay": AntsDecay()}),
    ]:
        curves[name] = error_curve(
            trainings[grid_name].grid,
            n=n,
            n_graphs=eval_graphs,
            t_max=eval_t_max,
            seed=eval_seed,
            region=region,
            restarts=restarts,
            cache=cache,
            workers=workers,
            colony_overrides=overrides,
        )

    improvement = improvement_vs_stage(trainings["normal"].contributors)

    t_early = min(25, eval_t_max)
    checks = {
        "early_beats_normal_at_t25": float(curves["early-only"].at(t_early).mean())
        < float(curves["normal"].at(t_early).mean()),
        "normal_beats_early_at_end": float(curves["normal"].final().mean())
        < float(curves["early-only"].final().mean()),
        "decay_worse_than_normal_paired": paired_separation(
            curves["early-decay"].final(), curves["normal"].final()
        )
        > 0,
        "improvement_non_increasing": improvement.non_increasing,
    }
    return SurvivalScenario(
        trainings=trainings, curves=curves, improvement=improvement, checks=checks
    )
