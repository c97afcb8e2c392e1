"""Random Euclidean TSP instances, tours, and exact optima.

Instances are immutable: coordinate and distance arrays are marked
read-only after construction so they can be shared freely between threads
and processes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegenerateRegionError, InvalidTourError, SizeExceededError
from .seeding import MASK64, substream

MIN_PAIR_DISTANCE = 1e-9  # duplicate points would blow up 1/d**beta weights
MAX_POINT_ATTEMPTS = 1000
EXACT_N_LIMIT = 15

SHAPES = ("unit-square", "rectangle", "circle")
POINT_LAWS = ("uniform", "gaussian", "triangular")


@dataclass(frozen=True)
class RegionSpec:
    """Sampling region and point law for instance generation.

    shape: "unit-square", "rectangle" (width x height), or "circle" (radius).
    pointlaw: "uniform", "gaussian" (center-peaked, sigma = extent/4), or
    "triangular" (per-axis, mode at center). Non-uniform laws and the circle
    are realized by drawing in the bounding box and rejecting points outside
    the region, so every generated point lies inside the declared region.
    """

    shape: str = "unit-square"
    width: float = 1.0
    height: float = 1.0
    radius: float = 1.0
    pointlaw: str = "uniform"

    def __post_init__(self) -> None:
        if self.shape not in SHAPES:
            raise ValueError(f"unknown region shape: {self.shape!r}")
        if self.pointlaw not in POINT_LAWS:
            raise ValueError(f"unknown point law: {self.pointlaw!r}")
        if self.shape == "rectangle" and (self.width <= 0 or self.height <= 0):
            raise ValueError("rectangle needs positive width and height")
        if self.shape == "circle" and self.radius <= 0:
            raise ValueError("circle needs positive radius")

    def bounds(self) -> tuple[float, float, float, float]:
        """Bounding box (xmin, xmax, ymin, ymax)."""
        if self.shape == "unit-square":
            return 0.0, 1.0, 0.0, 1.0
        if self.shape == "rectangle":
            return 0.0, self.width, 0.0, self.height
        r = self.radius
        return -r, r, -r, r

    def contains(self, x: float, y: float) -> bool:
        xmin, xmax, ymin, ymax = self.bounds()
        if self.shape == "circle":
            return math.hypot(x, y) <= self.radius
        return xmin <= x <= xmax and ymin <= y <= ymax

    def key(self) -> str:
        """Canonical string used in cache keys and file metadata."""
        if self.shape == "unit-square":
            geo = "unit-square"
        elif self.shape == "rectangle":
            geo = f"rectangle({self.width:g}x{self.height:g})"
        else:
            geo = f"circle({self.radius:g})"
        return f"{geo}:{self.pointlaw}"

    def to_dict(self) -> dict:
        d = {"shape": self.shape, "pointlaw": self.pointlaw}
        if self.shape == "rectangle":
            d["width"] = self.width
            d["height"] = self.height
        elif self.shape == "circle":
            d["radius"] = self.radius
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RegionSpec":
        known = {"shape", "pointlaw", "width", "height", "radius"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown region keys: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class Instance:
    """A symmetric Euclidean TSP instance."""

    points: np.ndarray  # (n, 2) float64
    dist: np.ndarray    # (n, n) float64, symmetric, zero diagonal
    n: int
    seed: int
    region: RegionSpec = field(default_factory=RegionSpec)

    def __post_init__(self) -> None:
        self.points.setflags(write=False)
        self.dist.setflags(write=False)

    def key(self) -> str:
        return f"s{self.seed}-n{self.n}-{self.region.key()}"


@dataclass(frozen=True)
class Tour:
    """A Hamiltonian cycle: vertex order plus closed-cycle length."""

    order: np.ndarray  # (n,) int64 permutation
    length: float

    def __post_init__(self) -> None:
        self.order.setflags(write=False)


def _draw_point(rng: np.random.Generator, region: RegionSpec) -> tuple[float, float]:
    xmin, xmax, ymin, ymax = region.bounds()
    law = region.pointlaw
    if law == "uniform":
        x = xmin + (xmax - xmin) * rng.random()
        y = ymin + (ymax - ymin) * rng.random()
    elif law == "gaussian":
        cx, cy = (xmin + xmax) / 2, (ymin + ymax) / 2
        x = rng.normal(cx, (xmax - xmin) / 4)
        y = rng.normal(cy, (ymax - ymin) / 4)
    else:  # triangular, mode at the center of each axis
        x = rng.triangular(xmin, (xmin + xmax) / 2, xmax)
        y = rng.triangular(ymin, (ymin + ymax) / 2, ymax)
    return x, y


def generate_instance(n: int, region: RegionSpec | None = None, seed: int = 0) -> Instance:
    """Sample n points i.i.d. from the region's point law, deterministically in seed.

    Points landing outside the region (possible for gaussian draws and the
    circle's bounding box) or closer than MIN_PAIR_DISTANCE to an accepted
    point are redrawn, up to MAX_POINT_ATTEMPTS tries each.
    """
    if n < 3:
        raise ValueError(f"instance needs n >= 3 vertices, got {n}")
    region = region or RegionSpec()
    seed = int(seed) & MASK64
    rng = substream(seed, 0)

    pts = np.empty((n, 2))
    for i in range(n):
        for attempt in range(MAX_POINT_ATTEMPTS):
            x, y = _draw_point(rng, region)
            if not region.contains(x, y):
                continue
            if i and np.min(np.hypot(pts[:i, 0] - x, pts[:i, 1] - y)) < MIN_PAIR_DISTANCE:
                continue
            pts[i] = x, y
            break
        else:
            raise DegenerateRegionError(
                f"could not place point {i} after {MAX_POINT_ATTEMPTS} attempts "
                f"in {region.key()}"
            )

    dx = pts[:, 0][:, None] - pts[:, 0][None, :]
    dy = pts[:, 1][:, None] - pts[:, 1][None, :]
    dist = np.hypot(dx, dy)
    return Instance(points=pts, dist=dist, n=n, seed=seed, region=region)


def check_permutation(order: np.ndarray, n: int) -> np.ndarray:
    """Return order as int64 after verifying it visits each vertex exactly once."""
    order = np.asarray(order, dtype=np.int64)
    if order.shape != (n,) or np.any(order < 0) or np.any(order >= n):
        raise InvalidTourError(f"order is not a permutation of 0..{n - 1}")
    if np.bincount(order, minlength=n).max() != 1:
        raise InvalidTourError("order visits some vertex more than once")
    return order


def tour_length(inst: Instance, order: np.ndarray) -> float:
    """Closed-cycle length of the given vertex order."""
    order = check_permutation(order, inst.n)
    return float(np.sum(inst.dist[order, np.roll(order, -1)]))


def make_tour(inst: Instance, order: np.ndarray) -> Tour:
    order = check_permutation(order, inst.n)
    return Tour(order=order.copy(), length=tour_length(inst, order))


def random_tour(inst: Instance, rng: np.random.Generator) -> Tour:
    """Uniformly random permutation tour."""
    order = rng.permutation(inst.n).astype(np.int64)
    return Tour(order=order, length=float(np.sum(inst.dist[order, np.roll(order, -1)])))


def nearest_neighbor_tour(inst: Instance, start: int = 0) -> Tour:
    """Greedy tour: repeatedly move to the closest unvisited vertex.

    Ties break toward the lowest vertex index, so the result is deterministic.
    """
    n = inst.n
    if not 0 <= start < n:
        raise ValueError(f"start vertex {start} out of range for n={n}")
    order = np.empty(n, dtype=np.int64)
    order[0] = start
    visited = np.zeros(n, dtype=bool)
    visited[start] = True
    current = start
    for k in range(1, n):
        row = inst.dist[current].copy()
        row[visited] = np.inf
        current = int(np.argmin(row))  # argmin takes the lowest index on ties
        order[k] = current
        visited[current] = True
    return Tour(order=order, length=float(np.sum(inst.dist[order, np.roll(order, -1)])))


def exact_optimum(inst: Instance) -> tuple[Tour, float]:
    """Certified optimal cycle via the Held-Karp dynamic program (n <= 15)."""
    n = inst.n
    if n > EXACT_N_LIMIT:
        raise SizeExceededError(
            f"exact solve limited to n <= {EXACT_N_LIMIT} (got {n}); "
            "use reference_optimum for larger instances"
        )
    d = inst.dist
    m = n - 1  # vertices 1..n-1; tours anchored at vertex 0
    full = 1 << m
    dp = np.full((full, m), np.inf)
    parent = np.full((full, m), -1, dtype=np.int8)
    for j in range(m):
        dp[1 << j, j] = d[0, j + 1]

    idx = np.arange(m)
    for mask in range(1, full):
        row = dp[mask]
        present = (mask >> idx) & 1 == 1
        active = idx[present & np.isfinite(row)]
        if active.size == 0:
            continue
        absent = idx[~present]
        if absent.size == 0:
            continue
        # extend each partial path ending at `active` by every absent vertex
        cand = row[active][:, None] + d[np.ix_(active + 1, absent + 1)]
        best = np.argmin(cand, axis=0)
        lengths = cand[best, np.arange(absent.size)]
        dp[mask | (1 << absent), absent] = lengths
        parent[mask | (1 << absent), absent] = active[best]

    closing = dp[full - 1] + d[idx + 1, 0]
    last = int(np.argmin(closing))
    best_len = float(closing[last])

    order = np.empty(n, dtype=np.int64)
    order[0] = 0
    mask = full - 1
    j = last
    for pos in range(n - 1, 0, -1):
        order[pos] = j + 1
        pj = parent[mask, j]
        mask ^= 1 << j
        j = int(pj)
    tour = Tour(order=order, length=float(np.sum(inst.dist[order, np.roll(order, -1)])))
    return tour, best_len


def instance_to_json(inst: Instance) -> str:
    doc = {
        "seed": inst.seed,
        "n": inst.n,
        "region": inst.region.to_dict(),
        "points": [[float(x), float(y)] for x, y in inst.points],
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def save_instance(inst: Instance, path: str | Path) -> None:
    Path(path).write_text(instance_to_json(inst) + "\n", encoding="utf-8")


def load_instance(path: str | Path) -> Instance:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    unknown = set(doc) - {"seed", "n", "region", "points"}
    if unknown:
        raise ValueError(f"unknown instance keys: {sorted(unknown)}")
    pts = np.asarray(doc["points"], dtype=np.float64)
    if pts.shape != (doc["n"], 2):
        raise ValueError("points array does not match declared n")
    dx = pts[:, 0][:, None] - pts[:, 0][None, :]
    dy = pts[:, 1][:, None] - pts[:, 1][None, :]
    dist = np.hypot(dx, dy)
    return Instance(
        points=pts,
        dist=dist,
        n=int(doc["n"]),
        seed=int(doc["seed"]),
        region=RegionSpec.from_dict(doc["region"]),
    )
