import itertools

import numpy as np
import pytest

from netgibbs.graphs import (
    Dyad,
    Network,
    StateSpaceOverflowError,
    TypeProfile,
    dyad_from_index,
    dyad_index,
    enumerate_networks,
    n_dyads,
    out_subgraph,
    switch_link,
    typed_outdegrees,
)


def test_switch_creates_and_severs():
    g = Network.empty(2)
    g01 = switch_link(g, Dyad(0, 1))
    assert g01.has(Dyad(0, 1)) and g01.n_links == 1
    assert switch_link(g01, Dyad(0, 1)) == g


def test_switch_other_direction_and_commutation():
    g = Network.from_dyads(2, [(0, 1)])
    both = switch_link(g, Dyad(1, 0))
    assert both.has(Dyad(0, 1)) and both.has(Dyad(1, 0))
    e = Network.empty(2)
    ab = switch_link(switch_link(e, Dyad(0, 1)), Dyad(1, 0))
    ba = switch_link(switch_link(e, Dyad(1, 0)), Dyad(0, 1))
    assert ab == ba == both


def test_switch_involution_exhaustive_n3():
    for g in enumerate_networks(3):
        for idx in range(n_dyads(3)):
            d = dyad_from_index(3, idx)
            assert switch_link(switch_link(g, d), d) == g


def test_switch_commutes_exhaustive_n3():
    dyads = [dyad_from_index(3, k) for k in range(n_dyads(3))]
    for g in enumerate_networks(3):
        for d1, d2 in itertools.combinations(dyads, 2):
            assert switch_link(switch_link(g, d1), d2) == switch_link(switch_link(g, d2), d1)


def test_switch_properties_n4():
    rng = np.random.default_rng(44)
    dyads = [dyad_from_index(4, k) for k in range(n_dyads(4))]
    for mask in rng.integers(0, 1 << 12, size=200):
        g = Network(4, int(mask))
        for d in dyads:
            assert switch_link(switch_link(g, d), d) == g
        d1, d2 = rng.choice(len(dyads), size=2, replace=False)
        a, b = dyads[d1], dyads[d2]
        assert switch_link(switch_link(g, a), b) == switch_link(switch_link(g, b), a)


def test_self_dyad_rejected():
    with pytest.raises(ValueError):
        Dyad(1, 1)
    with pytest.raises(ValueError):
        dyad_index(3, 2, 2)


def test_out_of_range_dyad_rejected():
    g = Network.empty(3)
    with pytest.raises(ValueError):
        switch_link(g, Dyad(0, 5))


@pytest.mark.parametrize("n,count", [(2, 4), (3, 64), (4, 4096)])
def test_enumeration_count(n, count):
    seen = set()
    total = 0
    for g in enumerate_networks(n):
        seen.add(g.mask)
        total += 1
    assert total == count and len(seen) == count


def test_enumeration_overflow():
    with pytest.raises(StateSpaceOverflowError):
        list(enumerate_networks(6))
    # N=5 is exactly at the default cap and must be allowed
    gen = enumerate_networks(5)
    assert next(gen).mask == 0


def test_dyad_index_bijection():
    for n in (2, 3, 4, 5):
        for idx in range(n_dyads(n)):
            d = dyad_from_index(n, idx)
            assert d.index(n) == idx
        # row-major over ordered pairs, diagonal skipped
        expected = [(i, j) for i in range(n) for j in range(n) if i != j]
        got = [(dyad_from_index(n, k).i, dyad_from_index(n, k).j) for k in range(n_dyads(n))]
        assert got == expected


def test_out_subgraph_examples():
    g = Network.from_dyads(2, [(0, 1), (1, 0)])
    assert out_subgraph(g, 0) == Network.from_dyads(2, [(0, 1)])
    assert out_subgraph(Network.empty(3), 1) == Network.empty(3)
    h = Network.from_dyads(3, [(0, 1), (0, 2), (2, 1)])
    assert out_subgraph(h, 2) == Network.from_dyads(3, [(2, 1)])


def test_out_subgraph_partitions_links():
    for g in enumerate_networks(3):
        assert sum(out_subgraph(g, i).n_links for i in range(3)) == g.n_links


def test_typed_outdegrees_examples():
    tp = TypeProfile.from_assignment([0, 1, 1])
    assert typed_outdegrees(Network.empty(3), 0, tp).tolist() == [0, 0]
    g = Network.from_dyads(3, [(0, 1), (0, 2)])
    assert typed_outdegrees(g, 0, tp).tolist() == [0, 2]
    tp2 = TypeProfile.from_assignment([0, 0])
    g2 = Network.from_dyads(2, [(0, 1), (1, 0)])
    assert typed_outdegrees(g2, 1, tp2).tolist() == [1]


def test_typed_outdegrees_size_mismatch():
    tp = TypeProfile.from_assignment([0, 1])
    with pytest.raises(ValueError):
        typed_outdegrees(Network.empty(3), 0, tp)


def test_type_profile_validation():
    with pytest.raises(ValueError):
        TypeProfile.from_weights([0.5, 0.6])
    with pytest.raises(ValueError):
        TypeProfile.from_weights([1.2, -0.2])
    tp = TypeProfile.from_counts([2, 3])
    assert tp.counts().tolist() == [2, 3]
    assert np.allclose(tp.weight_array(), [0.4, 0.6])


def test_hex_serialization_roundtrip():
    g = Network(3, 0x3F)
    assert g.to_hex() == "g:3f"
    assert Network.from_hex(3, "g:3f") == g
    with pytest.raises(ValueError):
        Network.from_hex(3, "3f")
