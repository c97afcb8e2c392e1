import math

import numpy as np
import pytest

from colony_lab.localsearch import (
    ReferenceCache,
    descend_order,
    reference_key,
    reference_optimum,
    two_opt,
)
from colony_lab.seeding import substream
from colony_lab.tsp import (
    RegionSpec,
    exact_optimum,
    generate_instance,
    make_tour,
    random_tour,
)

from oracles import improving_pair_exists


def test_uncrosses_square_diagonals(square_corners):
    crossed = make_tour(square_corners, [0, 2, 1, 3])
    assert crossed.length == pytest.approx(2 + 2 * math.sqrt(2), abs=1e-12)
    fixed = two_opt(square_corners, crossed)
    assert fixed.length == pytest.approx(4.0, abs=1e-12)


def test_optimal_tour_is_a_fixpoint():
    for seed in (3, 4, 5):
        inst = generate_instance(11, RegionSpec(), seed=seed)
        opt, length = exact_optimum(inst)
        again = two_opt(inst, opt)
        assert again.length == pytest.approx(length, abs=1e-12)
        assert np.array_equal(again.order, opt.order)


def test_never_lengthens_and_reaches_fixpoint(medium_instance):
    rng = substream(9, 0)
    for _ in range(20):
        start = random_tour(medium_instance, rng)
        out = two_opt(medium_instance, start)
        assert out.length <= start.length + 1e-12
        assert not improving_pair_exists(medium_instance.dist, out.order)


def test_idempotent(medium_instance):
    rng = substream(10, 0)
    start = random_tour(medium_instance, rng)
    once = two_opt(medium_instance, start)
    twice = two_opt(medium_instance, once)
    assert np.array_equal(once.order, twice.order)
    assert twice.length == once.length


def test_output_is_permutation(medium_instance):
    rng = substream(12, 0)
    out, _ = descend_order(medium_instance, rng.permutation(50).astype(np.int64))
    assert sorted(out.tolist()) == list(range(50))


def test_reference_delegates_to_exact_below_limit():
    inst = generate_instance(12, RegionSpec(), seed=31)
    _, exact = exact_optimum(inst)
    assert reference_optimum(inst, restarts=3) == exact


def test_reference_bounded_by_single_descents():
    inst = generate_instance(60, RegionSpec(), seed=32)
    ref = reference_optimum(inst, restarts=40)
    for r in range(10):
        rng = substream(inst.seed, 7, r)
        _, single = descend_order(inst, rng.permutation(60).astype(np.int64))
        assert ref <= single + 1e-12


def test_reference_monotone_in_restarts():
    inst = generate_instance(40, RegionSpec(), seed=33)
    r10 = reference_optimum(inst, restarts=10)
    r40 = reference_optimum(inst, restarts=40)
    assert r40 <= r10 + 1e-15


def test_reference_deterministic():
    inst = generate_instance(40, RegionSpec(), seed=34)
    assert reference_optimum(inst, restarts=20) == reference_optimum(inst, restarts=20)


def test_reference_rejects_bad_restarts(small_instance):
    with pytest.raises(ValueError):
        reference_optimum(small_instance, restarts=0)


def test_reference_cache_roundtrip(tmp_path):
    inst = generate_instance(40, RegionSpec(), seed=35)
    path = tmp_path / "refcache.json"
    cache = ReferenceCache(path)
    value = reference_optimum(inst, restarts=15, cache=cache)
    cache.save()
    reloaded = ReferenceCache(path)
    assert reloaded.get(reference_key(inst, 15)) == value
    # a hit short-circuits recomputation: poison the cache and observe
    poisoned = ReferenceCache(path)
    poisoned.put(reference_key(inst, 15), 123.0)
    assert reference_optimum(inst, restarts=15, cache=poisoned) == 123.0
