"""2-opt segment-reversal local search and the multi-start reference optimum.

The 2-opt descent uses first-improvement order: positions are scanned
row-major over (i, j) segment endpoints, the first reversal that strictly
shortens the cycle is applied, and the scan restarts from the beginning.
A tour is returned only when a full scan finds no improving reversal.

A segment [i..j] (position 0 stays outside the segment; reversing the
complement gives the same cycle) improves the tour iff

    d(prev_i, v_i) + d(v_j, next_j) > d(prev_i, v_j) + d(v_i, next_j)

with both sides evaluated as two-term sums, so the comparison is bit-exact
reproducible.

The reference optimum runs the spec'd multi-start phase (independent
random-start 2-opt descents) and then polishes with a small deterministic
iterated local search: double-bridge kicks plus a deeper descent that
alternates 2-opt with Or-opt segment relocation. Plain multi-start 2-opt
alone was measured 0.4-1.1% above stronger baselines on n=100, which is
larger than the error bands it has to support; the polish closes that gap
while staying deterministic in the instance seed.
"""

from __future__ import annotations

import json
import threading
from pathlib import Path

import numpy as np
from numba import njit

from .seeding import substream
from .tsp import EXACT_N_LIMIT, Instance, Tour, check_permutation, exact_optimum

# substream namespaces under the instance seed
_NS_REF_START = 7    # multi-start permutations, keyed (namespace, restart)
_NS_REF_KICKS = 8    # polish kick sequences, keyed (namespace, trajectory)

_METHOD_TAG = "2opt-ms+ils30n"

POLISH_TRAJECTORIES = 2
POLISH_KICKS_PER_VERTEX = 30


@njit(cache=True)
def _two_opt_descend(d: np.ndarray, order: np.ndarray) -> int:
    """In-place first-improvement 2-opt to a fixpoint. Returns reversal count."""
    n = order.shape[0]
    moves = 0
    improved = True
    while improved:
        improved = False
        for i in range(1, n - 1):
            a = order[i - 1]
            b = order[i]
            d_ab = d[a, b]
            for j in range(i + 1, n):
                c = order[j]
                nxt = order[j + 1] if j + 1 < n else order[0]
                if d_ab + d[c, nxt] > d[a, c] + d[b, nxt]:
                    lo, hi = i, j
                    while lo < hi:
                        order[lo], order[hi] = order[hi], order[lo]
                        lo += 1
                        hi -= 1
                    moves += 1
                    improved = True
                    break
            if improved:
                break
    return moves


@njit(cache=True)
def _or_opt_move(d: np.ndarray, order: np.ndarray) -> bool:
    """Apply the first improving Or-opt relocation (segment length 1..3).

    Segments may be inserted forward or reversed. Returns True if a move
    was applied.
    """
    n = order.shape[0]
    for seg in range(1, 4):
        for i in range(1, n - seg):
            u = order[i]
            v = order[i + seg - 1]
            prev = order[i - 1]
            nxt = order[i + seg] if i + seg < n else order[0]
            gain = (d[prev, u] + d[v, nxt]) - d[prev, nxt]
            if gain <= 0.0:
                continue
            for j in range(0, n):
                if i - 1 <= j <= i + seg - 1:
                    continue
                x = order[j]
                y = order[j + 1] if j + 1 < n else order[0]
                base = d[x, y]
                cost_fwd = (d[x, u] + d[v, y]) - base
                cost_rev = (d[x, v] + d[u, y]) - base
                reverse = cost_rev < cost_fwd
                cost = cost_rev if reverse else cost_fwd
                if cost < gain:
                    segbuf = np.empty(seg, dtype=np.int64)
                    for k in range(seg):
                        segbuf[k] = order[i + seg - 1 - k] if reverse else order[i + k]
                    rest = np.empty(n - seg, dtype=np.int64)
                    m = 0
                    for k in range(n):
                        if i <= k < i + seg:
                            continue
                        rest[m] = order[k]
                        m += 1
                    m = 0
                    for k in range(n - seg):
                        order[m] = rest[k]
                        m += 1
                        if rest[k] == x:
                            for q in range(seg):
                                order[m] = segbuf[q]
                                m += 1
                    return True
    return False


@njit(cache=True)
def _deep_descend(d: np.ndarray, order: np.ndarray) -> None:
    """Alternate 2-opt and Or-opt until neither finds an improvement."""
    while True:
        _two_opt_descend(d, order)
        if not _or_opt_move(d, order):
            return


@njit(cache=True)
def _cycle_length(d: np.ndarray, order: np.ndarray) -> float:
    n = order.shape[0]
    total = 0.0
    for k in range(n):
        total += d[order[k], order[k + 1] if k + 1 < n else order[0]]
    return total


@njit(cache=True)
def _ils_trajectory(d: np.ndarray, start: np.ndarray, cuts: np.ndarray) -> float:
    """Iterated local search: double-bridge kicks + deep descent, accept if shorter."""
    n = start.shape[0]
    best = start.copy()
    _deep_descend(d, best)
    best_len = _cycle_length(d, best)
    cur = best.copy()
    for it in range(cuts.shape[0]):
        p1 = cuts[it, 0]
        p2 = cuts[it, 1]
        p3 = cuts[it, 2]
        nxt = np.empty(n, dtype=np.int64)
        m = 0
        for k in range(p1):
            nxt[m] = cur[k]
            m += 1
        for k in range(p2, p3):
            nxt[m] = cur[k]
            m += 1
        for k in range(p1, p2):
            nxt[m] = cur[k]
            m += 1
        for k in range(p3, n):
            nxt[m] = cur[k]
            m += 1
        _deep_descend(d, nxt)
        ln = _cycle_length(d, nxt)
        if ln < best_len:
            best_len = ln
            best = nxt.copy()
            cur = nxt
        else:
            cur = best.copy()
    return best_len


def two_opt(inst: Instance, tour: Tour) -> Tour:
    """Reverse improving segments until none remain; never lengthens the tour."""
    order = check_permutation(tour.order, inst.n).copy()
    _two_opt_descend(inst.dist, order)
    return Tour(order=order, length=float(np.sum(inst.dist[order, np.roll(order, -1)])))


def descend_order(inst: Instance, order: np.ndarray) -> tuple[np.ndarray, float]:
    """2-opt fixpoint of a raw order array (no permutation re-check)."""
    out = order.copy()
    _two_opt_descend(inst.dist, out)
    return out, float(np.sum(inst.dist[out, np.roll(out, -1)]))


class ReferenceCache:
    """Length cache for reference optima, optionally persisted to JSON.

    Writes are serialized by a lock; keys are pure functions of
    (instance seed, n, region, restarts, method), so concurrent duplicate
    computation is idempotent.
    """

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path else None
        self._lock = threading.Lock()
        self._data: dict[str, float] = {}
        if self.path and self.path.exists():
            self._data = json.loads(self.path.read_text(encoding="utf-8"))

    def __len__(self) -> int:
        return len(self._data)

    def get(self, key: str) -> float | None:
        return self._data.get(key)

    def put(self, key: str, value: float) -> None:
        with self._lock:
            self._data[key] = value

    def save(self) -> None:
        if not self.path:
            return
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            tmp = self.path.with_suffix(".tmp")
            tmp.write_text(
                json.dumps(self._data, indent=2, sort_keys=True) + "\n",
                encoding="utf-8",
            )
            tmp.replace(self.path)


def reference_key(inst: Instance, restarts: int, polish: bool = True) -> str:
    tag = _METHOD_TAG if polish else "2opt-ms"
    return f"{inst.key()}|r{restarts}|{tag}"


def reference_optimum(
    inst: Instance,
    restarts: int = 500,
    cache: ReferenceCache | None = None,
    polish: bool = True,
) -> float:
    """Reference (best-known) cycle length standing in for the true optimum.

    Exact (Held-Karp) below the DP size limit. Otherwise the minimum over
    `restarts` independent random-start 2-opt descents plus, when `polish`
    is on, a fixed number of iterated-local-search trajectories. All draws
    come from substreams of the instance seed, so the result is a pure
    function of (instance, restarts, polish); increasing restarts can only
    lower it.
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    if inst.n <= EXACT_N_LIMIT:
        _, best = exact_optimum(inst)
        return best

    key = reference_key(inst, restarts, polish)
    if cache is not None:
        hit = cache.get(key)
        if hit is not None:
            return hit

    n = inst.n
    best = np.inf
    for r in range(restarts):
        rng = substream(inst.seed, _NS_REF_START, r)
        _, length = descend_order(inst, rng.permutation(n).astype(np.int64))
        if length < best:
            best = length

    if polish:
        kicks = POLISH_KICKS_PER_VERTEX * n
        for traj in range(POLISH_TRAJECTORIES):
            rng = substream(inst.seed, _NS_REF_KICKS, traj)
            start = rng.permutation(n).astype(np.int64)
            cuts = np.sort(
                rng.choice(np.arange(1, n), size=(kicks, 3), replace=True), axis=1
            ).astype(np.int64)
            best = min(best, float(_ils_trajectory(inst.dist, start, cuts)))

    best = float(best)
    if cache is not None:
        cache.put(key, best)
    return best
