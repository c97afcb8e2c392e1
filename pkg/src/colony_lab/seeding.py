"""Counter-keyed random substreams.

Every stream is derived from a 64-bit seed plus an integer key tuple via
``numpy.random.SeedSequence(seed, spawn_key=key)``. Child streams are
therefore a pure function of (seed, key): adding or reordering parallelism
cannot shift anyone's stream, and no stream is ever produced by sequential
draws from another.

Within one colony run, per-ant generators are split off a per-iteration
PCG64 via ``jumped(ant_index)``, giving each ant an independent substream
keyed by (run seed, iteration, ant index).
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
_KEY_MOD = 1 << 32


def _canonical_key(key: tuple[int, ...]) -> tuple[int, ...]:
    out = []
    for k in key:
        k = int(k)
        if not 0 <= k < _KEY_MOD:
            raise ValueError(f"substream key component out of range: {k}")
        out.append(k)
    return tuple(out)


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for (seed, key)."""
    ss = np.random.SeedSequence(int(seed) & MASK64, spawn_key=_canonical_key(key))
    return np.random.Generator(np.random.PCG64(ss))


def child_seed(seed: int, *key: int) -> int:
    """64-bit child seed for (seed, key), for handing to sub-computations."""
    ss = np.random.SeedSequence(int(seed) & MASK64, spawn_key=_canonical_key(key))
    return int(ss.generate_state(1, np.uint64)[0])


def iteration_bitgen(run_seed: int, namespace: int, t: int) -> np.random.PCG64:
    """Base PCG64 for one colony iteration; split per ant with ``.jumped``."""
    ss = np.random.SeedSequence(
        int(run_seed) & MASK64, spawn_key=_canonical_key((namespace, t))
    )
    return np.random.PCG64(ss)


def ant_generator(base: np.random.PCG64, ant_index: int) -> np.random.Generator:
    """Ant's private substream: the iteration base jumped ant_index times.

    ``jumped`` copies, so the base itself is never advanced; generators for
    any subset of ants can be created in any order.
    """
    return np.random.Generator(base.jumped(ant_index))
