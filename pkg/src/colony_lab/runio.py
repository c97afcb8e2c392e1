"""Run-directory output files: CSVs and JSON documents.

All CSVs use headers, UTF-8, LF line endings, and 9-significant-digit
floats. Output files never contain timestamps, hostnames, or worker
counts, so a rerun with the same config and seed is byte-identical.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .engine import RunTrace
from .experiments import ErrorCurve, StageAnalysis, StageImprovement
from .population import ContributorSet, ParamGrid, StageBuckets, save_grid
from .tsp import Instance


def fmt(value) -> str:
    """9-significant-digit float formatting; ints and strings pass through."""
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.9g}"


def write_csv(path: str | Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def write_json(path: str | Path, doc: dict) -> None:
    Path(path).write_text(
        json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8", newline="\n"
    )


def trace_summary_rows(trace: RunTrace):
    """Rows (t, best_known, n_contributors, mean_alpha_contrib, mean_beta_contrib)."""
    per_t = trace.contributors_per_iteration()
    for t in range(1, trace.t_max + 1):
        mask = trace.contrib_t == t
        if mask.any():
            mean_a = float(trace.contrib_alpha[mask].mean())
            mean_b = float(trace.contrib_beta[mask].mean())
        else:
            mean_a = mean_b = float("nan")
        yield (t, trace.best_known[t - 1], int(per_t[t - 1]), mean_a, mean_b)


def write_trace_csv(path: str | Path, trace: RunTrace) -> None:
    write_csv(
        path,
        ["t", "best_known", "n_contributors", "mean_alpha_contrib", "mean_beta_contrib"],
        trace_summary_rows(trace),
    )


def write_contributors_csv(path: str | Path, contribs: ContributorSet) -> None:
    rows = zip(contribs.t, contribs.alpha, contribs.beta, contribs.improvement)
    write_csv(path, ["t", "alpha", "beta", "improvement_fraction"], rows)


def write_tour_json(path: str | Path, inst: Instance, tour_order, length: float) -> None:
    write_json(
        path,
        {
            "instance_seed": inst.seed,
            "n": inst.n,
            "region": inst.region.to_dict(),
            "order": [int(v) for v in tour_order],
            "length": float(length),
        },
    )


def write_error_curve_csv(path: str | Path, curve: ErrorCurve) -> None:
    mean = curve.mean
    stderr = curve.stderr
    rows = ((t + 1, mean[t], stderr[t]) for t in range(curve.t_max))
    write_csv(path, ["t", "epsilon_mean", "epsilon_stderr"], rows)


def write_grid_csv(path: str | Path, grid: ParamGrid) -> None:
    """Plot-ready long format: one row per cell (alpha, beta, weight)."""
    rows = (
        (grid.alpha_axis[a], grid.beta_axis[b], grid.weights[a, b])
        for a in range(grid.alpha_axis.size)
        for b in range(grid.beta_axis.size)
    )
    write_csv(path, ["alpha", "beta", "weight"], rows)


def write_stage_scatter_csv(
    path: str | Path, analysis: StageAnalysis, buckets: StageBuckets
) -> None:
    write_csv(
        path,
        ["bucket", "alpha", "beta", "weight"],
        analysis.scatter_rows(buckets),
    )


def write_improvement_csv(path: str | Path, improvement: StageImprovement) -> None:
    rows = zip(
        improvement.rows.t, improvement.rows.improvement
    )
    write_csv(path, ["t", "improvement_fraction"], rows)


def save_buckets(dirpath: Path, buckets: StageBuckets, meta: dict) -> list[str]:
    names = []
    for label, grid in zip(buckets.labels(), buckets.grids):
        name = f"grid_stage_{label}.json"
        save_grid(grid, dirpath / name, meta={**meta, "stage": label})
        names.append(name)
    return names


def curve_meta(curve: ErrorCurve) -> dict:
    return {
        **curve.meta,
        "communities": curve.communities,
        "speedup": curve.speedup,
        "final_epsilon_mean": float(curve.final().mean()),
        "final_epsilon_stderr": (
            float(curve.final().std(ddof=1) / np.sqrt(curve.n_graphs))
            if curve.n_graphs > 1
            else 0.0
        ),
    }
