"""The ant-colony loop on one instance.

Each iteration: sample per-ant heuristic parameters, let every ant build a
biased self-avoiding walk over a frozen pheromone field (optionally
improving each walk with 2-opt), record contributors (ants strictly beating
the best-known length entering the iteration), then let the best p(t)
percent deposit pheromone and evaporate the field by p(t) percent.

An ant at vertex i moves to an unvisited vertex j with probability
proportional to (background + tau_ij)^alpha / d_ij^beta. Weights are
computed in log space and rescaled by their maximum before normalization,
which cannot overflow and underflows only the negligible candidates.

Randomness: every draw inside a run comes from counter-derived substreams
of the run seed — parameter sampling from (run seed, PARAMS, t), ant walks
from (run seed, WALK, t) jumped by ant index — so traces are bit-identical
under any scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numba import njit

from .localsearch import _two_opt_descend
from .seeding import ant_generator, iteration_bitgen, substream
from .tsp import Instance, Tour

NS_PARAMS = 0
NS_WALK = 1

ParamSampler = Callable[[int, int, np.random.Generator], tuple[np.ndarray, np.ndarray]]


@dataclass(frozen=True)
class AntParams:
    """One ant's heuristics: trust in deposited pheromone vs own distance sense."""

    alpha: float
    beta: float

    def __post_init__(self) -> None:
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be nonnegative")


@dataclass
class PheromoneField:
    """Symmetric nonnegative per-edge pheromone amounts."""

    tau: np.ndarray

    @classmethod
    def zeros(cls, n: int) -> "PheromoneField":
        return cls(tau=np.zeros((n, n)))

    def check(self) -> None:
        if not np.array_equal(self.tau, self.tau.T):
            raise AssertionError("pheromone field lost symmetry")
        if np.any(self.tau < 0):
            raise AssertionError("pheromone field went negative")


@dataclass(frozen=True)
class AntsDecay:
    """Shrinking workforce: n_ants(t) = round(base * exp(-(t-t_start)/time_constant))."""

    t_start: int = 50
    time_constant: float = 200.0


@dataclass(frozen=True)
class ColonyConfig:
    n_ants: int = 50
    t_max: int = 1000
    p_start: float = 50.0     # percent of ants depositing at t=1
    p_end: float = 8.0        # percent from t >= p_knee on
    p_knee: int = 300
    speedup: bool = False     # 2-opt every walk before recording it
    background: float = 0.01  # added to tau in the transition rule
    decay: AntsDecay | None = None

    def __post_init__(self) -> None:
        if self.n_ants < 1:
            raise ValueError("n_ants must be >= 1")
        if self.t_max < 1:
            raise ValueError("t_max must be >= 1")
        if not (0 < self.p_end <= self.p_start <= 100):
            raise ValueError("need 0 < p_end <= p_start <= 100")
        if self.p_knee < 1:
            raise ValueError("p_knee must be >= 1")
        if self.background <= 0:
            raise ValueError("background must be positive")


def p_schedule(t: int, cfg: ColonyConfig) -> float:
    """Deposit/evaporation percentage at iteration t (linear ramp, then flat)."""
    if t < 1:
        raise ValueError(f"iteration index must be >= 1, got {t}")
    if t >= cfg.p_knee or cfg.p_knee == 1:
        return cfg.p_end
    return cfg.p_start + (cfg.p_end - cfg.p_start) * (t - 1) / (cfg.p_knee - 1)


def n_ants_at(cfg: ColonyConfig, t: int) -> int:
    if cfg.decay is None or t <= cfg.decay.t_start:
        return cfg.n_ants
    raw = cfg.n_ants * math.exp(-(t - cfg.decay.t_start) / cfg.decay.time_constant)
    return max(1, int(math.floor(raw + 0.5)))


def transition_probabilities(
    inst: Instance,
    phero: PheromoneField,
    current: int,
    visited: set[int] | np.ndarray,
    params: AntParams,
    background: float = 0.01,
) -> np.ndarray:
    """Step distribution over all vertices; visited ones get exactly 0.

    Probabilities are proportional to (background + tau)^alpha / d^beta over
    the unvisited vertices, computed as exp(logweight - max logweight).
    """
    n = inst.n
    mask = np.zeros(n, dtype=bool)
    if isinstance(visited, set):
        mask[list(visited)] = True
    else:
        mask = np.asarray(visited, dtype=bool).copy()
    mask[current] = True
    if mask.all():
        raise ValueError("no unvisited vertex to move to")

    dist_row = inst.dist[current].copy()
    dist_row[current] = 1.0  # masked; keeps log finite
    lw = params.alpha * np.log(background + phero.tau[current]) - params.beta * np.log(
        dist_row
    )
    lw[mask] = -np.inf
    w = np.exp(lw - lw.max())
    total = w.sum()
    if total <= 0.0 or not np.isfinite(total):  # unreachable after max-rescale; guard
        w = (~mask).astype(float)
        total = w.sum()
    return w / total


def _pick_from_weights(w: np.ndarray, u: float) -> int:
    """Inverse-CDF pick; never selects a zero-weight entry for u in [0, 1)."""
    cs = np.cumsum(w)
    idx = int(np.searchsorted(cs, u * cs[-1], side="right"))
    if idx >= w.shape[0] or w[idx] == 0.0:
        idx = int(np.flatnonzero(w > 0)[-1])
    return idx


def ant_walk(
    inst: Instance,
    phero: PheromoneField,
    params: AntParams,
    rng: np.random.Generator,
    background: float = 0.01,
) -> Tour:
    """One biased self-avoiding walk: uniform random start, then sampled steps."""
    n = inst.n
    order = np.empty(n, dtype=np.int64)
    visited = np.zeros(n, dtype=bool)
    start = int(rng.integers(n))
    order[0] = start
    visited[start] = True
    current = start
    log_tau = np.log(background + phero.tau)
    dist_safe = inst.dist.copy()
    np.fill_diagonal(dist_safe, 1.0)
    log_dist = np.log(dist_safe)
    for k in range(1, n):
        lw = params.alpha * log_tau[current] - params.beta * log_dist[current]
        lw[visited] = -np.inf
        w = np.exp(lw - lw.max())
        current = _pick_from_weights(w, float(rng.random()))
        order[k] = current
        visited[current] = True
    return Tour(order=order, length=float(np.sum(inst.dist[order, np.roll(order, -1)])))


def _walk_batch_reference(
    log_tau: np.ndarray,
    log_dist: np.ndarray,
    alphas: np.ndarray,
    betas: np.ndarray,
    starts: np.ndarray,
    uniforms: np.ndarray,
) -> np.ndarray:
    """All ants of one iteration walk in lockstep (same math as ant_walk).

    Plain-numpy twin of _walk_batch, kept as the comparison target for the
    compiled version. starts: (A,) start vertices; uniforms: (A, n-1)
    per-ant step draws. Returns orders (A, n); lengths are computed by the
    caller so one summation convention is used everywhere.
    """
    n = log_dist.shape[0]
    n_ants = starts.shape[0]
    rows = np.arange(n_ants)
    order = np.empty((n_ants, n), dtype=np.int64)
    visited = np.zeros((n_ants, n), dtype=bool)
    order[:, 0] = starts
    visited[rows, starts] = True
    current = starts.astype(np.int64)
    a_col = alphas[:, None]
    b_col = betas[:, None]
    for k in range(1, n):
        lw = a_col * log_tau[current] - b_col * log_dist[current]
        lw[visited] = -np.inf
        w = np.exp(lw - lw.max(axis=1)[:, None])
        cs = np.cumsum(w, axis=1)
        r = uniforms[:, k - 1] * cs[:, -1]
        nxt = np.minimum((cs <= r[:, None]).sum(axis=1), n - 1)
        bad = w[rows, nxt] == 0.0
        if bad.any():  # float-edge fallback: last positive-weight candidate
            for row in np.flatnonzero(bad):
                nxt[row] = np.flatnonzero(w[row] > 0)[-1]
        order[:, k] = nxt
        visited[rows, nxt] = True
        current = nxt
    return order


@njit(cache=True)
def _walk_batch(
    log_tau: np.ndarray,
    log_dist: np.ndarray,
    alphas: np.ndarray,
    betas: np.ndarray,
    starts: np.ndarray,
    uniforms: np.ndarray,
) -> np.ndarray:
    """Compiled lockstep walk; bit-identical to _walk_batch_reference.

    Weights exist only for unvisited vertices; summing them in ascending
    vertex order reproduces the reference's cumsum (its visited entries
    are exact zeros).
    """
    n = log_dist.shape[0]
    n_ants = starts.shape[0]
    order = np.empty((n_ants, n), dtype=np.int64)
    w = np.empty(n)
    for a in range(n_ants):
        alpha = alphas[a]
        beta = betas[a]
        visited = np.zeros(n, dtype=np.bool_)
        cur = starts[a]
        order[a, 0] = cur
        visited[cur] = True
        for k in range(1, n):
            lt = log_tau[cur]
            ld = log_dist[cur]
            m = -np.inf
            for j in range(n):
                if visited[j]:
                    w[j] = -np.inf
                    continue
                lw = alpha * lt[j] - beta * ld[j]
                w[j] = lw
                if lw > m:
                    m = lw
            total = 0.0
            for j in range(n):
                if visited[j]:
                    w[j] = 0.0
                else:
                    w[j] = np.exp(w[j] - m)
                    total += w[j]
            r = uniforms[a, k - 1] * total
            cs = 0.0
            nxt = -1
            for j in range(n):
                cs += w[j]
                if cs > r and not visited[j]:
                    nxt = j
                    break
            if nxt < 0:  # float-edge fallback: last positive-weight candidate
                for j in range(n - 1, -1, -1):
                    if w[j] > 0.0:
                        nxt = j
                        break
            order[a, k] = nxt
            visited[nxt] = True
            cur = nxt
    return order


@njit(cache=True)
def _two_opt_descend_batch(d: np.ndarray, orders: np.ndarray) -> None:
    for a in range(orders.shape[0]):
        _two_opt_descend(d, orders[a])


def select_winners(lengths: np.ndarray, p: float) -> np.ndarray:
    """Indices of the best p percent of ants (at least one), shortest first.

    Ties break toward the lower ant index.
    """
    if lengths.size == 0:
        raise ValueError("no ants to select from")
    k = max(1, int(math.floor(p / 100.0 * lengths.size + 0.5)))
    k = min(k, lengths.size)
    return np.argsort(lengths, kind="stable")[:k]


def deposit_pheromone(
    inst: Instance,
    phero: PheromoneField,
    tours: list[np.ndarray],
    lengths: np.ndarray,
) -> PheromoneField:
    """Rank-weighted symmetric deposit along each winner's tour.

    Winner at rank r of k gets weight 2(k+1-r)/(k(k+1)) (linear, summing
    to 1); each of its edges gains weight * (1/L) * min(1, (L/n)/d_e), so
    steps longer than the tour's mean step are penalized proportionally.
    """
    k = len(tours)
    if k == 0:
        raise ValueError("winner list is empty")
    if np.any(np.diff(lengths) < 0):
        raise ValueError("winners must be ranked ascending by length")
    n = inst.n
    tau = phero.tau
    for r in range(1, k + 1):
        order = tours[r - 1]
        length = float(lengths[r - 1])
        weight = 2.0 * (k + 1 - r) / (k * (k + 1))
        heads = order
        tails = np.roll(order, -1)
        d_e = inst.dist[heads, tails]
        amount = weight / length * np.minimum(1.0, (length / n) / d_e)
        tau[heads, tails] += amount
        tau[tails, heads] += amount
    return phero


def evaporate(phero: PheromoneField, p: float) -> PheromoneField:
    """Multiply every pheromone amount by (1 - p/100)."""
    if not 0 < p <= 100:
        raise ValueError(f"evaporation percent must be in (0, 100], got {p}")
    phero.tau *= 1.0 - p / 100.0
    return phero


@dataclass
class RunTrace:
    """Per-iteration record of one colony run."""

    n: int
    t_max: int
    best_known: np.ndarray          # (t_max,) running minimum length
    n_ants: np.ndarray              # (t_max,) ants walked per iteration
    contrib_t: np.ndarray           # one entry per contributor, iteration index
    contrib_alpha: np.ndarray
    contrib_beta: np.ndarray
    contrib_improvement: np.ndarray  # (best_before - L) / best_before; 0 at t=1
    best_order: np.ndarray
    best_length: float
    run_seed: int

    @property
    def n_contributors(self) -> int:
        return int(self.contrib_t.size)

    def contributors_per_iteration(self) -> np.ndarray:
        return np.bincount(self.contrib_t, minlength=self.t_max + 1)[1:]


def fixed_params_sampler(alpha: float, beta: float) -> ParamSampler:
    """Sampler giving every ant the same (alpha, beta)."""

    def sample(t: int, count: int, rng: np.random.Generator):
        return np.full(count, alpha), np.full(count, beta)

    return sample


def run_colony(
    inst: Instance,
    sampler: ParamSampler,
    cfg: ColonyConfig,
    run_seed: int,
) -> RunTrace:
    """Iterate the colony on one instance and record the full trace.

    sampler(t, count, rng) must return per-ant (alphas, betas) for
    iteration t; it is called once per iteration with a dedicated
    substream.
    """
    n = inst.n
    tau = np.zeros((n, n))
    dist_safe = inst.dist.copy()
    np.fill_diagonal(dist_safe, 1.0)
    log_dist = np.log(dist_safe)

    best_known = np.empty(cfg.t_max)
    ants_per_t = np.empty(cfg.t_max, dtype=np.int64)
    c_t: list[np.ndarray] = []
    c_alpha: list[np.ndarray] = []
    c_beta: list[np.ndarray] = []
    c_improve: list[np.ndarray] = []

    best_len = np.inf
    best_order = np.arange(n, dtype=np.int64)
    field = PheromoneField(tau=tau)

    for t in range(1, cfg.t_max + 1):
        count = n_ants_at(cfg, t)
        ants_per_t[t - 1] = count
        alphas, betas = sampler(t, count, substream(run_seed, NS_PARAMS, t))
        alphas = np.asarray(alphas, dtype=np.float64)
        betas = np.asarray(betas, dtype=np.float64)

        base = iteration_bitgen(run_seed, NS_WALK, t)
        starts = np.empty(count, dtype=np.int64)
        uniforms = np.empty((count, n - 1))
        for a in range(count):
            gen = ant_generator(base, a)
            starts[a] = gen.integers(n)
            uniforms[a] = gen.random(n - 1)

        log_tau = np.log(cfg.background + tau)
        orders = _walk_batch(log_tau, log_dist, alphas, betas, starts, uniforms)
        if cfg.speedup:
            _two_opt_descend_batch(inst.dist, orders)
        lengths = inst.dist[orders, np.roll(orders, -1, axis=1)].sum(axis=1)

        best_before = best_len
        if t == 1:
            leader = int(np.argmin(lengths))
            c_t.append(np.array([1]))
            c_alpha.append(alphas[leader : leader + 1].copy())
            c_beta.append(betas[leader : leader + 1].copy())
            c_improve.append(np.zeros(1))
        else:
            hits = np.flatnonzero(lengths < best_before)
            if hits.size:
                c_t.append(np.full(hits.size, t))
                c_alpha.append(alphas[hits].copy())
                c_beta.append(betas[hits].copy())
                c_improve.append((best_before - lengths[hits]) / best_before)

        it_best = int(np.argmin(lengths))
        if lengths[it_best] < best_len:
            best_len = float(lengths[it_best])
            best_order = orders[it_best].copy()
        best_known[t - 1] = best_len

        p = p_schedule(t, cfg)
        widx = select_winners(lengths, p)
        deposit_pheromone(
            inst, field, [orders[i] for i in widx], lengths[widx]
        )
        evaporate(field, p)

    empty = np.empty(0)
    return RunTrace(
        n=n,
        t_max=cfg.t_max,
        best_known=best_known,
        n_ants=ants_per_t,
        contrib_t=(
            np.concatenate(c_t).astype(np.int64) if c_t else np.empty(0, dtype=np.int64)
        ),
        contrib_alpha=np.concatenate(c_alpha) if c_alpha else empty.copy(),
        contrib_beta=np.concatenate(c_beta) if c_beta else empty.copy(),
        contrib_improvement=np.concatenate(c_improve) if c_improve else empty.copy(),
        best_order=best_order,
        best_length=float(best_len),
        run_seed=int(run_seed),
    )
