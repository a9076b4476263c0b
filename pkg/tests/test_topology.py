import pytest

from gtvr.src.exceptions import InvalidSizeError, TopologyError
from gtvr.src.graph.topology import (
    Topology,
    build_complete,
    build_custom,
    build_exponential,
    build_geometric,
    build_ring,
    build_topology,
)


def test_ring_edges():
    t = build_ring(4)
    assert t.edges == frozenset({(0, 0), (1, 1), (2, 2), (3, 3), (3, 0), (0, 1), (1, 2), (2, 3)})
    assert t.in_neighbors(0) == [0, 3]
    assert t.out_neighbors(0) == [0, 1]


def test_exponential_hops():
    t = build_exponential(8)
    assert t.out_neighbors(0) == [0, 1, 2, 4]
    assert all(d == (4, 4) for d in t.degrees().values())


def test_exponential_wraps_duplicate_hops():
    # n=3: hops 1 and 2 reach both other nodes
    assert build_exponential(3).edges == build_complete(3).edges


def test_single_node():
    for builder in (build_ring, build_exponential, build_complete):
        t = builder(1)
        assert t.edges == frozenset({(0, 0)})


def test_invalid_size():
    with pytest.raises(InvalidSizeError):
        build_ring(0)
    with pytest.raises(InvalidSizeError):
        build_complete(-2)


def test_geometric_deterministic_and_symmetric():
    a = build_geometric(12, 0.5, seed=3)
    b = build_geometric(12, 0.5, seed=3)
    assert a.edges == b.edges
    assert a.seed == b.seed
    assert a.is_symmetric()


def test_geometric_retries_until_connected():
    t = build_geometric(15, 0.3, seed=0)
    assert t.seed >= 0
    assert t.to_dict()["seed"] == t.seed


def test_geometric_large_radius_is_complete():
    t = build_geometric(6, 10.0, seed=0)
    assert t.edges == build_complete(6).edges


def test_geometric_fails_within_budget():
    with pytest.raises(TopologyError, match="last seed tried"):
        build_geometric(30, 1e-3, seed=0, max_retries=3)


def test_disconnected_custom_rejected():
    with pytest.raises(TopologyError, match="not strongly connected"):
        build_custom(4, [[0, 1], [1, 0], [2, 3], [3, 2]])


def test_custom_adds_self_loops():
    t = build_custom(2, [[0, 1], [1, 0]])
    assert (0, 0) in t.edges and (1, 1) in t.edges


def test_missing_self_loop_rejected():
    with pytest.raises(TopologyError, match="self-loop"):
        Topology(n=2, edges=frozenset({(0, 1), (1, 0)}), kind="custom")


def test_build_topology_dispatch():
    assert build_topology("ring", 5).kind == "ring"
    with pytest.raises(TopologyError):
        build_topology("torus", 5)
    with pytest.raises(TopologyError):
        build_topology("custom", 3)
