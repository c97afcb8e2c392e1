"""Command-line front end: solve, train, experiment.

Config resolution: command defaults, then values from --config (a flat
JSON document, unknown keys rejected), then explicit CLI flags. The fully
resolved science config is written to <out>/config.json before any
computation. Execution-only settings (worker count, output directory,
cache path) stay out of config.json: results do not depend on them, and
the COLONY_LAB_THREADS environment variable overrides the --threads flag.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .engine import AntsDecay, ColonyConfig, run_colony
from .experiments import (
    SURVIVAL_RULES,
    TrainingConfig,
    error_curve,
    improvement_vs_stage,
    paired_separation,
    scale_sweep,
    stage_analysis,
    survival_scenarios,
    train_population,
)
from .localsearch import ReferenceCache
from .population import load_grid, save_grid, summarize, uniform_grid
from .runio import (
    curve_meta,
    save_buckets,
    write_contributors_csv,
    write_csv,
    write_error_curve_csv,
    write_grid_csv,
    write_improvement_csv,
    write_json,
    write_stage_scatter_csv,
    write_tour_json,
    write_trace_csv,
)
from .seeding import child_seed
from .tsp import RegionSpec, generate_instance, load_instance, save_instance

log = logging.getLogger("colony_lab")

CONFIG_VERSION = 1
SCENARIOS = ("scale-sweep", "stage", "speedup", "survival", "communities")

_COMMON_DEFAULTS = {
    "seed": 0,
    "region": "unit-square",
    "pointlaw": "uniform",
    "width": 1.0,
    "height": 1.0,
    "radius": 1.0,
}

_COLONY_DEFAULTS = {
    "n_ants": 50,
    "p_start": 50.0,
    "p_end": 8.0,
    "p_knee": 300,
    "background": 0.01,
}

_TRAIN_DEFAULTS = {
    **_COMMON_DEFAULTS,
    **_COLONY_DEFAULTS,
    "n": 100,
    "t_max": 200,
    "max_graphs": 500,
    "eq_window": 50,
    "eq_tv": 0.02,
    "pool_size": 4000,
    "staged": False,
    "survival": "none",
    "speedup": False,
    "warm_start": None,
}

_SOLVE_DEFAULTS = {
    **_COMMON_DEFAULTS,
    **_COLONY_DEFAULTS,
    "n": 100,
    "t_max": 1000,
    "speedup": False,
    "decay": False,
    "grid": None,
    "instance": None,
}

_EXPERIMENT_DEFAULTS = {
    **_COMMON_DEFAULTS,
    **_COLONY_DEFAULTS,
    "n": 100,
    "t_max": 200,
    "max_graphs": 500,
    "eq_window": 50,
    "eq_tv": 0.02,
    "pool_size": 4000,
    "sizes": "10,20,50,100",
    "eval_graphs": 50,
    "eval_t_max": 1000,
    "restarts": 500,
    "communities": 2,
    "late_t_max": 1000,
    "stage_t_max": 1000,
    "stage_graphs": 200,
    "curve_graphs": 0,
    "grid": None,
    "plain_grid": None,
}


def resolve_threads(flag: int | str | None) -> int:
    env = os.environ.get("COLONY_LAB_THREADS")
    raw = env if env not in (None, "") else flag
    if raw in (None, "auto"):
        return os.cpu_count() or 1
    value = int(raw)
    if value < 1:
        raise ValueError("thread count must be >= 1")
    return value


def _region_from_config(cfg: dict) -> RegionSpec:
    return RegionSpec(
        shape=cfg["region"],
        width=cfg["width"],
        height=cfg["height"],
        radius=cfg["radius"],
        pointlaw=cfg["pointlaw"],
    )


def resolve_config(defaults: dict, config_path: str | None, overrides: dict) -> dict:
    resolved = dict(defaults)
    if config_path:
        doc = json.loads(Path(config_path).read_text(encoding="utf-8"))
        doc.pop("version", None)
        doc.pop("command", None)
        doc.pop("scenario", None)
        unknown = set(doc) - set(defaults)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        resolved.update(doc)
    for key, value in overrides.items():
        if value is not None:
            resolved[key] = value
    return resolved


def _write_resolved_config(out: Path, command: str, cfg: dict, scenario: str | None = None) -> None:
    from . import __version__

    doc = {
        "version": CONFIG_VERSION,
        "code_version": __version__,
        "command": command,
        **cfg,
    }
    if scenario:
        doc["scenario"] = scenario
    write_json(out / "config.json", doc)


def _training_config(cfg: dict, n: int | None = None, **kw) -> TrainingConfig:
    base = TrainingConfig(
        n=n if n is not None else cfg["n"],
        region=_region_from_config(cfg),
        t_max=cfg["t_max"],
        max_graphs=cfg["max_graphs"],
        eq_window=cfg["eq_window"],
        eq_tv=cfg["eq_tv"],
        pool_size=cfg["pool_size"],
        n_ants=cfg["n_ants"],
        p_start=cfg["p_start"],
        p_end=cfg["p_end"],
        p_knee=cfg["p_knee"],
        background=cfg["background"],
    )
    return replace(base, **kw) if kw else base


def _progress(label: str):
    def hook(done: int, total: int) -> None:
        log.info("%s: graph %d/%d", label, done, total)

    return hook


def cmd_solve(cfg: dict, out: Path, threads: int, ref_cache: str | None) -> int:
    region = _region_from_config(cfg)
    if cfg["instance"]:
        inst = load_instance(cfg["instance"])
    else:
        inst = generate_instance(cfg["n"], region, child_seed(cfg["seed"], 0))
    source = load_grid(cfg["grid"])[0] if cfg["grid"] else uniform_grid()
    colony = ColonyConfig(
        n_ants=cfg["n_ants"],
        t_max=cfg["t_max"],
        p_start=cfg["p_start"],
        p_end=cfg["p_end"],
        p_knee=cfg["p_knee"],
        speedup=cfg["speedup"],
        background=cfg["background"],
        decay=AntsDecay() if cfg["decay"] else None,
    )
    trace = run_colony(inst, source.sampler(), colony, child_seed(cfg["seed"], 1))

    save_instance(inst, out / "instance.json")
    write_trace_csv(out / "trace.csv", trace)
    from .experiments import contributors_from_trace

    write_contributors_csv(out / "contributors.csv", contributors_from_trace(trace))
    write_tour_json(out / "best_tour.json", inst, trace.best_order, trace.best_length)
    write_json(
        out / "summary.json",
        {
            "best_length": trace.best_length,
            "n_contributors": trace.n_contributors,
            "final_best_known": float(trace.best_known[-1]),
        },
    )
    # internal invariant check: the reported tour must be a valid cycle
    if sorted(trace.best_order.tolist()) != list(range(inst.n)):
        log.error("best tour is not a permutation")
        return 1
    return 0


def cmd_train(cfg: dict, out: Path, threads: int, ref_cache: str | None) -> int:
    kw = {"survival": cfg["survival"]}
    if cfg["staged"]:
        kw["staged"] = True
        kw["stage_bounds"] = _stage_bounds_for(cfg["t_max"])
    tcfg = _training_config(cfg, **kw)
    warm = load_grid(cfg["warm_start"])[0] if cfg["warm_start"] else None
    result = train_population(tcfg, cfg["seed"], warm_start=warm, progress=_progress("train"))

    meta = {
        "graphs_trained": result.graphs_used,
        "M": tcfg.pool_size,
        "schedule": {"p_start": tcfg.p_start, "p_end": tcfg.p_end, "p_knee": tcfg.p_knee},
        "converged": result.converged,
        "survival": tcfg.survival,
    }
    if result.buckets is not None:
        save_buckets(out, result.buckets, meta)
    else:
        save_grid(result.grid, out / "grid.json", meta=meta)
        write_grid_csv(out / "grid.csv", result.grid)
        write_json(out / "summary.json", {**summarize(result.grid).to_dict(), **meta})
    write_contributors_csv(out / "contributors.csv", result.contributors)
    write_csv(
        out / "training_log.csv",
        ["graph", "n_contributors"],
        ((g + 1, int(nc)) for g, nc in enumerate(result.n_c_per_graph)),
    )
    return 0


def _stage_bounds_for(t_max: int) -> tuple[tuple[int, int], ...]:
    from .population import DEFAULT_STAGE_BOUNDS

    bounds = [list(b) for b in DEFAULT_STAGE_BOUNDS if b[0] <= t_max]
    bounds[-1][1] = t_max
    return tuple((lo, hi) for lo, hi in bounds)


def _experiment_scale_sweep(cfg, out, threads, cache) -> dict:
    sizes = [int(s) for s in str(cfg["sizes"]).split(",") if s]
    results = scale_sweep(sizes, cfg["seed"], base=_training_config(cfg, n=sizes[0]), workers=threads)
    rows = []
    for r in results:
        save_grid(
            r.result.grid,
            out / f"grid_n{r.n}.json",
            meta={"n": r.n, "graphs_trained": r.result.graphs_used, "converged": r.result.converged},
        )
        write_contributors_csv(out / f"contributors_n{r.n}.csv", r.result.contributors)
        s = r.summary
        rows.append(
            (r.n, s.mode_alpha, s.mean_alpha, s.mode_beta, s.mean_beta, s.correlation)
        )
    write_csv(
        out / "scale_summary.csv",
        ["n", "mode_alpha", "mean_alpha", "mode_beta", "mean_beta", "correlation"],
        rows,
    )
    summaries = {r.n: r.summary.to_dict() for r in results}
    means = {r.n: r.summary.mean_alpha for r in results}
    corr = {r.n: r.summary.correlation for r in results}
    first, last = sizes[0], sizes[-1]
    return {
        "sizes": sizes,
        "grids": summaries,
        "checks": {
            "alpha_mean_increases": means[last] > means[first],
            "correlation_increases": corr[last] > corr[first],
        },
    }


def _experiment_stage(cfg, out, threads, cache) -> dict:
    if cfg["plain_grid"]:
        plain = load_grid(cfg["plain_grid"])[0]
    else:
        plain_res = train_population(
            _training_config(cfg), child_seed(cfg["seed"], 0), progress=_progress("train plain")
        )
        plain = plain_res.grid
        save_grid(plain, out / "grid_plain.json", meta={"stage": "time-independent"})
        write_contributors_csv(out / "contributors_plain.csv", plain_res.contributors)
    staged_cfg = _training_config(
        cfg,
        t_max=cfg["stage_t_max"],
        max_graphs=cfg["stage_graphs"],
        staged=True,
        stage_bounds=_stage_bounds_for(cfg["stage_t_max"]),
    )
    staged = train_population(
        staged_cfg, child_seed(cfg["seed"], 1), warm_start=plain, progress=_progress("train staged")
    )
    analysis = stage_analysis(staged, plain_grid=plain)
    save_buckets(out, staged.buckets, {"warm_start": "time-independent grid"})
    write_contributors_csv(out / "contributors_staged.csv", staged.contributors)
    write_stage_scatter_csv(out / "stage_scatter.csv", analysis, staged.buckets)
    summary = {
        "labels": analysis.labels,
        "stage_summaries": [s.to_dict() for s in analysis.summaries],
        "mean_beta_per_stage": [s.mean_beta for s in analysis.summaries],
        "mean_alpha_per_stage": [s.mean_alpha for s in analysis.summaries],
        "contributor_counts": analysis.contributor_counts.tolist(),
        "union_tv_vs_plain": analysis.union_tv_vs_plain,
        "checks": {"beta_decreases_with_stage": analysis.beta_ordering_ok},
    }
    if cfg["curve_graphs"] > 0:
        eval_seed = child_seed(cfg["seed"], 2)
        kw = dict(
            n=cfg["n"], n_graphs=cfg["curve_graphs"], t_max=cfg["stage_t_max"],
            seed=eval_seed, region=_region_from_config(cfg), restarts=cfg["restarts"],
            cache=cache, workers=threads,
        )
        for name, source in [("plain", plain), ("staged", staged.buckets)]:
            curve = error_curve(source, **kw)
            write_error_curve_csv(out / f"error_curve_{name}.csv", curve)
            summary[f"final_epsilon_{name}"] = float(curve.final().mean())
    return summary


def _experiment_speedup(cfg, out, threads, cache) -> dict:
    if cfg["grid"]:
        grid = load_grid(cfg["grid"])[0]
    else:
        res = train_population(
            _training_config(cfg), child_seed(cfg["seed"], 0), progress=_progress("train")
        )
        grid = res.grid
        save_grid(grid, out / "grid_plain.json", meta={"speedup_trained": False})
        write_contributors_csv(out / "contributors_plain.csv", res.contributors)
    speed_res = train_population(
        _training_config(cfg, speedup=True),
        child_seed(cfg["seed"], 1),
        progress=_progress("train speedup"),
    )
    save_grid(speed_res.grid, out / "grid_speedup_trained.json", meta={"speedup_trained": True})
    write_contributors_csv(out / "contributors_speedup_trained.csv", speed_res.contributors)

    eval_seed = child_seed(cfg["seed"], 2)
    kw = dict(
        n=cfg["n"], n_graphs=cfg["eval_graphs"], t_max=cfg["eval_t_max"],
        seed=eval_seed, region=_region_from_config(cfg), restarts=cfg["restarts"],
        cache=cache, workers=threads,
    )
    plain_curve = error_curve(grid, speedup=False, **kw)
    speed_curve = error_curve(grid, speedup=True, **kw)
    write_error_curve_csv(out / "error_curve_plain.csv", plain_curve)
    write_error_curve_csv(out / "error_curve_speedup.csv", speed_curve)

    s_plain = summarize(grid)
    s_speed = summarize(speed_res.grid)
    return {
        "plain": curve_meta(plain_curve),
        "speedup": curve_meta(speed_curve),
        "grid_modes": {
            "plain": [s_plain.mode_alpha, s_plain.mode_beta],
            "speedup_trained": [s_speed.mode_alpha, s_speed.mode_beta],
        },
        "checks": {
            "speedup_lowers_error": float(speed_curve.final().mean())
            < float(plain_curve.final().mean()),
            "speedup_paired_separation": paired_separation(
                plain_curve.final(), speed_curve.final()
            ),
        },
    }


def _experiment_survival(cfg, out, threads, cache) -> dict:
    scenario = survival_scenarios(
        n=cfg["n"],
        seed=cfg["seed"],
        region=_region_from_config(cfg),
        train_cfg=_training_config(cfg),
        late_t_max=cfg["late_t_max"],
        eval_graphs=cfg["eval_graphs"],
        eval_t_max=cfg["eval_t_max"],
        restarts=cfg["restarts"],
        cache=cache,
        workers=threads,
        progress=lambda stage, done, total: log.info("%s: graph %d/%d", stage, done, total),
    )
    for name, res in scenario.trainings.items():
        save_grid(
            res.grid,
            out / f"grid_{name}.json",
            meta={"survival": name, "graphs_trained": res.graphs_used, "converged": res.converged},
        )
        write_contributors_csv(out / f"contributors_{name}.csv", res.contributors)
    for name, curve in scenario.curves.items():
        write_error_curve_csv(out / f"error_curve_{name}.csv", curve)
    write_improvement_csv(out / "improvement_vs_stage.csv", scenario.improvement)
    return {
        "curves": {name: curve_meta(c) for name, c in scenario.curves.items()},
        "grids": {
            name: summarize(res.grid).to_dict()
            for name, res in scenario.trainings.items()
        },
        "improvement_mean_per_stage": scenario.improvement.mean_improvement.tolist(),
        "checks": scenario.checks,
    }


def _experiment_communities(cfg, out, threads, cache) -> dict:
    if cfg["grid"]:
        grid = load_grid(cfg["grid"])[0]
    else:
        res = train_population(
            _training_config(cfg), child_seed(cfg["seed"], 0), progress=_progress("train")
        )
        grid = res.grid
        save_grid(grid, out / "grid.json", meta={"for": "communities"})
        write_contributors_csv(out / "contributors.csv", res.contributors)
    k = int(cfg["communities"])
    eval_seed = child_seed(cfg["seed"], 1)
    kw = dict(
        n=cfg["n"], n_graphs=cfg["eval_graphs"], t_max=cfg["eval_t_max"],
        seed=eval_seed, region=_region_from_config(cfg), restarts=cfg["restarts"],
        cache=cache, workers=threads,
    )
    single = error_curve(grid, communities=1, **kw)
    multi = error_curve(grid, communities=k, **kw)
    write_error_curve_csv(out / "error_curve_k1.csv", single)
    write_error_curve_csv(out / f"error_curve_k{k}.csv", multi)
    separation = paired_separation(single.final(), multi.final())
    return {
        "k": k,
        "k1": curve_meta(single),
        f"k{k}": curve_meta(multi),
        "checks": {
            "multi_community_lower": float(multi.final().mean())
            < float(single.final().mean()),
            "paired_separation": separation,
            "pointwise_never_worse": bool(np.all(multi.eps <= single.eps + 1e-12)),
        },
    }


_SCENARIO_RUNNERS = {
    "scale-sweep": _experiment_scale_sweep,
    "stage": _experiment_stage,
    "speedup": _experiment_speedup,
    "survival": _experiment_survival,
    "communities": _experiment_communities,
}


def cmd_experiment(scenario: str, cfg: dict, out: Path, threads: int, ref_cache: str | None) -> int:
    cache = ReferenceCache(ref_cache) if ref_cache else ReferenceCache()
    summary = _SCENARIO_RUNNERS[scenario](cfg, out, threads, cache)
    cache.save()
    write_json(out / "summary.json", summary)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="colony-lab",
        description="Ant-colony TSP simulation with evolving heuristic parameters",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON config file; flags override its values")
        p.add_argument("--seed", type=int, default=None, help="master seed")
        p.add_argument("--out", required=True, help="run directory (created if missing)")
        p.add_argument("--threads", default=None, help="worker count or 'auto'")
        p.add_argument("--ref-cache", default=None, help="reference-optimum cache JSON path")
        p.add_argument("--region", choices=["unit-square", "rectangle", "circle"], default=None)
        p.add_argument("--pointlaw", choices=["uniform", "gaussian", "triangular"], default=None)
        p.add_argument("--width", type=float, default=None)
        p.add_argument("--height", type=float, default=None)
        p.add_argument("--radius", type=float, default=None)
        p.add_argument("--n-ants", type=int, default=None, dest="n_ants")

    solve = sub.add_parser("solve", help="run one colony on one instance")
    add_common(solve)
    solve.add_argument("--n", type=int, default=None)
    solve.add_argument("--t-max", type=int, default=None, dest="t_max")
    solve.add_argument("--speedup", action="store_true", default=None)
    solve.add_argument("--decay", action="store_true", default=None)
    solve.add_argument("--grid", default=None, help="parameter grid JSON to sample from")
    solve.add_argument("--instance", default=None, help="instance JSON instead of generating")

    train = sub.add_parser("train", help="train the parameter distribution")
    add_common(train)
    train.add_argument("--n", type=int, default=None)
    train.add_argument("--t-max", type=int, default=None, dest="t_max")
    train.add_argument("--max-graphs", type=int, default=None, dest="max_graphs")
    train.add_argument("--staged", action="store_true", default=None)
    train.add_argument("--survival", choices=list(SURVIVAL_RULES), default=None)
    train.add_argument("--warm-start", default=None, dest="warm_start")

    exp = sub.add_parser("experiment", help="run a full study scenario")
    exp.add_argument("scenario", choices=list(SCENARIOS))
    add_common(exp)
    exp.add_argument("--n", type=int, default=None)
    exp.add_argument("--t-max", type=int, default=None, dest="t_max")
    exp.add_argument("--max-graphs", type=int, default=None, dest="max_graphs")
    exp.add_argument("--sizes", default=None, help="comma-separated sizes for scale-sweep")
    exp.add_argument("--eval-graphs", type=int, default=None, dest="eval_graphs")
    exp.add_argument("--eval-t-max", type=int, default=None, dest="eval_t_max")
    exp.add_argument("--restarts", type=int, default=None)
    exp.add_argument("--k", type=int, default=None, dest="communities")
    exp.add_argument("--curve-graphs", type=int, default=None, dest="curve_graphs")
    exp.add_argument("--stage-graphs", type=int, default=None, dest="stage_graphs")
    exp.add_argument("--stage-t-max", type=int, default=None, dest="stage_t_max")
    exp.add_argument("--late-t-max", type=int, default=None, dest="late_t_max")
    exp.add_argument("--grid", default=None, help="reuse a trained grid JSON")
    exp.add_argument("--plain-grid", default=None, dest="plain_grid")

    return parser


_CONFIG_KEYS = {
    "solve": _SOLVE_DEFAULTS,
    "train": _TRAIN_DEFAULTS,
    "experiment": _EXPERIMENT_DEFAULTS,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=logging.INFO, format="%(asctime)s %(levelname)s %(message)s", stream=sys.stderr
    )
    parser = build_parser()
    args = parser.parse_args(argv)

    defaults = _CONFIG_KEYS[args.command]
    overrides = {
        k: v
        for k, v in vars(args).items()
        if k in defaults and v is not None
    }
    try:
        cfg = resolve_config(defaults, args.config, overrides)
        threads = resolve_threads(args.threads)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        scenario = getattr(args, "scenario", None)
        _write_resolved_config(out, args.command, cfg, scenario)
        if args.command == "solve":
            return cmd_solve(cfg, out, threads, args.ref_cache)
        if args.command == "train":
            return cmd_train(cfg, out, threads, args.ref_cache)
        return cmd_experiment(scenario, cfg, out, threads, args.ref_cache)
    except (ValueError, FileNotFoundError, json.JSONDecodeError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
