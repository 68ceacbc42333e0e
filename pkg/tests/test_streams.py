"""Seed-stream layout: keyed substreams are stable, disjoint, and spawnable."""

import numpy as np

from samplab.streams import (
    DOMAIN_BOOTSTRAP,
    DOMAIN_PLOT_SAMPLING,
    DOMAIN_POPULATION,
    DOMAIN_SAMPLING,
    DOMAIN_STEMMAP,
    stream,
)


def test_domain_constants_are_distinct_small_ints():
    domains = [DOMAIN_POPULATION, DOMAIN_SAMPLING, DOMAIN_BOOTSTRAP,
               DOMAIN_STEMMAP, DOMAIN_PLOT_SAMPLING]
    assert domains == [0, 1, 2, 3, 4]


def test_same_key_reproduces_identical_bits():
    a = stream(7, 1, 2, 3).standard_normal(16)
    b = stream(7, 1, 2, 3).standard_normal(16)
    assert np.array_equal(a, b)


def test_different_keys_give_different_draws():
    base = stream(7, 1, 2, 3).standard_normal(16)
    for key in [(7, 1, 2, 4), (7, 1, 3, 3), (7, 2, 2, 3), (8, 1, 2, 3)]:
        other = stream(*key).standard_normal(16)
        assert not np.array_equal(base, other)


def test_keyed_stream_matches_seedsequence_spawn():
    # appending an index to the key is the same stream as SeedSequence.spawn
    for seed in (0, 5, 31415):
        children = np.random.SeedSequence(seed, spawn_key=(3,)).spawn(7)
        for i in (0, 3, 6):
            via_spawn = np.random.default_rng(children[i]).standard_normal(8)
            via_key = stream(seed, 3, i).standard_normal(8)
            assert np.array_equal(via_spawn, via_key)


def test_empty_key_is_plain_master_stream():
    a = stream(42).integers(0, 1 << 30, size=8)
    b = np.random.default_rng(np.random.SeedSequence(42, spawn_key=())).integers(
        0, 1 << 30, size=8)
    assert np.array_equal(a, b)
