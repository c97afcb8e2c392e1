"""The evolving distribution of heuristic parameters.

The population lives on a discrete (alpha, beta) grid. After each solved
graph the grid is mixed toward the empirical distribution of that graph's
contributors:

    new = (n_c / M) * empirical + (1 - n_c / M) * old

with n_c the contributor count and M the notional ant pool size. The
time-dependent variant keeps one grid per problem-stage bucket and applies
the same update per bucket using only that bucket's contributors.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

DEFAULT_AXIS_MAX = 5.0
DEFAULT_AXIS_STEP = 0.1
DEFAULT_POOL_SIZE = 4000
DEFAULT_STAGE_BOUNDS = ((1, 5), (6, 30), (31, 100), (101, 1000))

_NORM_TOL = 1e-9


def default_axis() -> np.ndarray:
    steps = int(round(DEFAULT_AXIS_MAX / DEFAULT_AXIS_STEP))
    return np.round(np.arange(steps + 1) * DEFAULT_AXIS_STEP, 10)


@dataclass
class ContributorSet:
    """Flat arrays of contributor records (one entry per contribution)."""

    alpha: np.ndarray
    beta: np.ndarray
    t: np.ndarray
    improvement: np.ndarray

    def __post_init__(self) -> None:
        self.alpha = np.asarray(self.alpha, dtype=np.float64)
        self.beta = np.asarray(self.beta, dtype=np.float64)
        self.t = np.asarray(self.t, dtype=np.int64)
        self.improvement = np.asarray(self.improvement, dtype=np.float64)
        sizes = {self.alpha.size, self.beta.size, self.t.size, self.improvement.size}
        if len(sizes) != 1:
            raise ValueError("contributor arrays must have equal length")
        if self.t.size and self.t.min() < 1:
            raise ValueError("contribution iteration indices start at 1")
        if self.improvement.size and (
            self.improvement.min() < 0 or self.improvement.max() >= 1
        ):
            raise ValueError("improvement fractions must lie in [0, 1)")

    def __len__(self) -> int:
        return int(self.alpha.size)

    @classmethod
    def empty(cls) -> "ContributorSet":
        z = np.empty(0)
        return cls(alpha=z, beta=z.copy(), t=np.empty(0, dtype=np.int64), improvement=z.copy())

    @classmethod
    def concatenate(cls, parts: list["ContributorSet"]) -> "ContributorSet":
        parts = [p for p in parts if len(p)]
        if not parts:
            return cls.empty()
        return cls(
            alpha=np.concatenate([p.alpha for p in parts]),
            beta=np.concatenate([p.beta for p in parts]),
            t=np.concatenate([p.t for p in parts]),
            improvement=np.concatenate([p.improvement for p in parts]),
        )

    def select(self, mask: np.ndarray) -> "ContributorSet":
        return ContributorSet(
            alpha=self.alpha[mask],
            beta=self.beta[mask],
            t=self.t[mask],
            improvement=self.improvement[mask],
        )

    def in_stage(self, lo: int, hi: int) -> "ContributorSet":
        return self.select((self.t >= lo) & (self.t <= hi))


class ParamGrid:
    """Discrete joint distribution over the (alpha, beta) grid."""

    def __init__(
        self,
        weights: np.ndarray,
        alpha_axis: np.ndarray | None = None,
        beta_axis: np.ndarray | None = None,
    ):
        self.alpha_axis = default_axis() if alpha_axis is None else np.asarray(alpha_axis, dtype=np.float64)
        self.beta_axis = default_axis() if beta_axis is None else np.asarray(beta_axis, dtype=np.float64)
        self.weights = np.asarray(weights, dtype=np.float64)
        if self.weights.shape != (self.alpha_axis.size, self.beta_axis.size):
            raise ValueError(
                f"weights shape {self.weights.shape} does not match axes "
                f"({self.alpha_axis.size}, {self.beta_axis.size})"
            )
        if np.any(self.weights < 0):
            raise ValueError("grid weights must be nonnegative")
        total = self.weights.sum()
        if abs(total - 1.0) > _NORM_TOL:
            raise ValueError(f"grid weights must sum to 1 (got {total!r})")
        self._cdf: np.ndarray | None = None

    def copy(self) -> "ParamGrid":
        return ParamGrid(self.weights.copy(), self.alpha_axis, self.beta_axis)

    @property
    def n_cells(self) -> int:
        return self.weights.size

    def _flat_cdf(self) -> np.ndarray:
        if self._cdf is None:
            self._cdf = np.cumsum(self.weights.ravel())
        return self._cdf

    def sample(self, count: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """Draw count cells i.i.d. proportional to weight; returns (alphas, betas)."""
        if count < 1:
            raise ValueError("count must be >= 1")
        cdf = self._flat_cdf()
        u = rng.random(count) * cdf[-1]
        flat = np.searchsorted(cdf, u, side="right")
        flat = np.minimum(flat, cdf.size - 1)
        zero = self.weights.ravel()[flat] == 0.0
        if zero.any():  # float-edge fallback: last positive-weight cell
            positive = np.flatnonzero(self.weights.ravel() > 0)
            flat[zero] = positive[-1]
        ai, bi = np.unravel_index(flat, self.weights.shape)
        return self.alpha_axis[ai], self.beta_axis[bi]

    def sampler(self):
        """Iteration-independent param source for run_colony."""

        def sample(t: int, count: int, rng: np.random.Generator):
            return self.sample(count, rng)

        return sample


def sample_params(
    grid: ParamGrid, count: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Draw count (alpha, beta) pairs i.i.d. from the grid."""
    return grid.sample(count, rng)


def uniform_grid(
    alpha_axis: np.ndarray | None = None, beta_axis: np.ndarray | None = None
) -> ParamGrid:
    a = default_axis() if alpha_axis is None else np.asarray(alpha_axis, dtype=np.float64)
    b = default_axis() if beta_axis is None else np.asarray(beta_axis, dtype=np.float64)
    w = np.full((a.size, b.size), 1.0 / (a.size * b.size))
    return ParamGrid(w, a, b)


def snap_indices(axis: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Nearest-cell index per value; ties go to the lower index, out-of-range
    values clamp to the nearest end."""
    values = np.atleast_1d(np.asarray(values, dtype=np.float64))
    # argmin returns the first (lowest) index among equal distances
    return np.argmin(np.abs(axis[None, :] - values[:, None]), axis=1)


def empirical_distribution(grid: ParamGrid, contributors: ContributorSet) -> ParamGrid:
    """Contributor mass snapped to the grid: 1/n_c per record at its nearest cell."""
    n_c = len(contributors)
    if n_c == 0:
        raise ValueError("cannot build an empirical distribution from zero contributors")
    ai = snap_indices(grid.alpha_axis, contributors.alpha)
    bi = snap_indices(grid.beta_axis, contributors.beta)
    w = np.zeros_like(grid.weights)
    np.add.at(w, (ai, bi), 1.0 / n_c)
    w /= w.sum()
    return ParamGrid(w, grid.alpha_axis, grid.beta_axis)


def evolve(grid: ParamGrid, contributors: ContributorSet, pool_size: int = DEFAULT_POOL_SIZE) -> ParamGrid:
    """Convex mix of the old grid toward the contributors' distribution."""
    n_c = len(contributors)
    if n_c > pool_size:
        raise ValueError(f"contributor count {n_c} exceeds pool size {pool_size}")
    if n_c == 0:
        return grid
    emp = empirical_distribution(grid, contributors)
    mix = n_c / pool_size
    w = mix * emp.weights + (1.0 - mix) * grid.weights
    w /= w.sum()
    return ParamGrid(w, grid.alpha_axis, grid.beta_axis)


def tv_distance(a: ParamGrid, b: ParamGrid) -> float:
    """Total-variation distance between two grids on the same axes."""
    return 0.5 * float(np.abs(a.weights - b.weights).sum())


@dataclass
class StageBuckets:
    """One grid per problem-stage bucket; bounds partition 1..t_max."""

    grids: list[ParamGrid]
    bounds: tuple[tuple[int, int], ...] = DEFAULT_STAGE_BOUNDS

    def __post_init__(self) -> None:
        if len(self.grids) != len(self.bounds):
            raise ValueError("one grid per bucket required")
        lo0 = self.bounds[0][0]
        if lo0 != 1:
            raise ValueError("first bucket must start at t=1")
        for (alo, ahi), (blo, bhi) in zip(self.bounds, self.bounds[1:]):
            if blo != ahi + 1:
                raise ValueError("buckets must be contiguous")
        if any(lo > hi for lo, hi in self.bounds):
            raise ValueError("bucket bounds must satisfy lo <= hi")

    @property
    def t_max(self) -> int:
        return self.bounds[-1][1]

    def bucket_index(self, t: int) -> int:
        for i, (lo, hi) in enumerate(self.bounds):
            if lo <= t <= hi:
                return i
        raise ValueError(f"iteration {t} outside bucket range 1..{self.t_max}")

    def labels(self) -> list[str]:
        return [f"t{lo}-{hi}" for lo, hi in self.bounds]

    def sampler(self):
        """Stage-aware param source for run_colony."""

        def sample(t: int, count: int, rng: np.random.Generator):
            return self.grids[self.bucket_index(t)].sample(count, rng)

        return sample

    @classmethod
    def from_grid(cls, grid: ParamGrid, bounds=DEFAULT_STAGE_BOUNDS) -> "StageBuckets":
        return cls(grids=[grid.copy() for _ in bounds], bounds=tuple(bounds))


def evolve_staged(
    buckets: StageBuckets,
    contributors: ContributorSet,
    pool_size: int = DEFAULT_POOL_SIZE,
) -> StageBuckets:
    """Apply the convex update independently per bucket.

    Each bucket mixes only toward its own contributors with its own n_c;
    empty buckets stay unchanged.
    """
    if len(contributors) and (
        contributors.t.min() < 1 or contributors.t.max() > buckets.t_max
    ):
        raise ValueError(
            f"contributor iteration outside bucket range 1..{buckets.t_max}"
        )
    new_grids = []
    for (lo, hi), grid in zip(buckets.bounds, buckets.grids):
        sub = contributors.in_stage(lo, hi)
        new_grids.append(evolve(grid, sub, pool_size))
    return StageBuckets(grids=new_grids, bounds=buckets.bounds)


@dataclass
class GridSummary:
    mode_alpha: float
    mode_beta: float
    mode_tied: bool
    mean_alpha: float
    mean_beta: float
    correlation: float
    correlation_degenerate: bool
    marginal_alpha: np.ndarray = field(repr=False)
    marginal_beta: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "mode_alpha": self.mode_alpha,
            "mode_beta": self.mode_beta,
            "mode_tied": self.mode_tied,
            "mean_alpha": self.mean_alpha,
            "mean_beta": self.mean_beta,
            "correlation": self.correlation,
            "correlation_degenerate": self.correlation_degenerate,
        }


def summarize(grid: ParamGrid) -> GridSummary:
    """Mode cell, marginals, means, and the alpha-beta Pearson correlation."""
    w = grid.weights
    flat_mode = int(np.argmax(w))  # first (lowest) index on ties
    tied = int(np.count_nonzero(w == w.ravel()[flat_mode])) > 1
    ai, bi = np.unravel_index(flat_mode, w.shape)
    marg_a = w.sum(axis=1)
    marg_b = w.sum(axis=0)
    mean_a = float(marg_a @ grid.alpha_axis)
    mean_b = float(marg_b @ grid.beta_axis)
    var_a = float(marg_a @ (grid.alpha_axis - mean_a) ** 2)
    var_b = float(marg_b @ (grid.beta_axis - mean_b) ** 2)
    cov = float(
        ((grid.alpha_axis - mean_a)[:, None] * (grid.beta_axis - mean_b)[None, :] * w).sum()
    )
    degenerate = var_a <= 0 or var_b <= 0
    corr = 0.0 if degenerate else cov / np.sqrt(var_a * var_b)
    return GridSummary(
        mode_alpha=float(grid.alpha_axis[ai]),
        mode_beta=float(grid.beta_axis[bi]),
        mode_tied=tied,
        mean_alpha=mean_a,
        mean_beta=mean_b,
        correlation=float(corr),
        correlation_degenerate=degenerate,
        marginal_alpha=marg_a,
        marginal_beta=marg_b,
    )


def grid_to_json(grid: ParamGrid, meta: dict | None = None) -> str:
    doc = {
        "alpha_axis": [float(v) for v in grid.alpha_axis],
        "beta_axis": [float(v) for v in grid.beta_axis],
        "weights": [float(v) for v in grid.weights.ravel()],  # row-major
        "meta": meta or {},
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def save_grid(grid: ParamGrid, path: str | Path, meta: dict | None = None) -> None:
    Path(path).write_text(grid_to_json(grid, meta) + "\n", encoding="utf-8")


def load_grid(path: str | Path) -> tuple[ParamGrid, dict]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    unknown = set(doc) - {"alpha_axis", "beta_axis", "weights", "meta"}
    if unknown:
        raise ValueError(f"unknown grid keys: {sorted(unknown)}")
    a = np.asarray(doc["alpha_axis"], dtype=np.float64)
    b = np.asarray(doc["beta_axis"], dtype=np.float64)
    w = np.asarray(doc["weights"], dtype=np.float64).reshape(a.size, b.size)
    return ParamGrid(w, a, b), doc.get("meta", {})
