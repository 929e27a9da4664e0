"""
Tests for core graph types, blowups and induced-copy verification
"""

from itertools import permutations

import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from errors import BudgetExceededError, InvalidInputError
from graph_core import (
    BipartitePair,
    Blowup,
    EdgeColoring,
    Graph,
    bfs_order,
    bipartition,
    blowup_from_model,
    blowup_to_model,
    build_graph,
    check_blowup_map,
    complete_bipartite_graph,
    complete_blowup,
    complete_block,
    complete_graph,
    construct_blowup,
    cycle_graph,
    empty_block,
    empty_graph,
    graph_from_model,
    graph_to_model,
    induced_subgraph,
    is_blowup_of,
    is_induced_copy,
    path_graph,
    relabel,
    restrict,
    verify_blowup,
)
from models import GraphModel, canonical_json


@st.composite
def graphs(draw, max_n=7):
    n = draw(st.integers(min_value=0, max_value=max_n))
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True)) if pairs else []
    return build_graph(n, chosen)


def test_build_graph_path():
    """Test a path on three vertices"""
    g = build_graph(3, [(0, 1), (1, 2)])
    assert g.edge_count == 2
    assert g.has_edge(0, 1) and g.has_edge(2, 1)
    assert not g.has_edge(0, 2)


def test_build_graph_collapses_duplicates():
    """Test that repeated pairs collapse into one edge"""
    g = build_graph(4, [(0, 1), (1, 0)])
    assert g.edge_count == 1


def test_build_graph_rejects_out_of_range():
    """Test that out-of-range endpoints are rejected with the pair"""
    with pytest.raises(InvalidInputError) as info:
        build_graph(5, [(0, 5)])
    assert info.value.detail["pair"] == [0, 5]


def test_build_graph_rejects_self_loop():
    """Test that self-loops are rejected"""
    with pytest.raises(InvalidInputError):
        build_graph(3, [(1, 1)])


@given(graphs())
def test_adjacency_symmetric_and_counted(g):
    """Test symmetry and degree-sum consistency for every constructed graph"""
    for u in range(g.n):
        assert not g.has_edge(u, u)
        for v in range(g.n):
            assert g.has_edge(u, v) == g.has_edge(v, u)
    assert sum(g.degree(v) for v in range(g.n)) == 2 * g.edge_count


def test_induced_subgraph_examples():
    """Test clique restriction, a non-adjacent pair and the empty subset"""
    k3, mapping = induced_subgraph(complete_graph(4), {0, 1, 2})
    assert k3 == complete_graph(3)
    assert mapping == (0, 1, 2)

    pair, _ = induced_subgraph(path_graph(4), {0, 2})
    assert pair == empty_graph(2)

    nothing, mapping = induced_subgraph(complete_graph(4), set())
    assert nothing.n == 0 and mapping == ()


def test_induced_subgraph_rejects_out_of_range():
    """Test that a vertex outside the graph is rejected"""
    with pytest.raises(InvalidInputError):
        induced_subgraph(path_graph(3), {0, 7})


def test_relabel_and_restrict():
    """Test ordered relabelling and restriction on original labels"""
    g = path_graph(4)
    assert relabel(g, [2, 1, 0]) == path_graph(3)
    kept = restrict(g, 0b0111)
    assert kept.edges() == [(0, 1), (1, 2)]
    assert kept.n == 4


def test_bipartition_and_odd_cycle():
    """Test the BFS 2-colouring and rejection of odd cycles"""
    assert bipartition(cycle_graph(4)) == ((0, 2), (1, 3))
    with pytest.raises(InvalidInputError):
        bipartition(cycle_graph(5))


def test_bfs_order_covers_components():
    """Test that the BFS order visits every vertex once"""
    g = build_graph(5, [(0, 1), (3, 4)])
    assert bfs_order(g) == [0, 1, 2, 3, 4]
    assert sorted(bfs_order(g, start=3)) == list(range(5))


def test_is_induced_copy_examples():
    """Test path-in-cycle, path-in-triangle and the color check"""
    p3 = path_graph(3)
    c4 = cycle_graph(4)
    assert is_induced_copy(c4, p3, [0, 1, 2])

    k3 = complete_graph(3)
    assert not any(is_induced_copy(k3, p3, m) for m in permutations(range(3)))

    coloring = EdgeColoring(c4, {(0, 1): 0, (1, 2): 1, (2, 3): 0, (0, 3): 1}, 2)
    assert is_induced_copy(c4, p3, [0, 1, 2])
    assert not is_induced_copy(c4, p3, [0, 1, 2], coloring, 0)
    assert not is_induced_copy(c4, p3, [0, 1, 2], coloring)


def test_is_induced_copy_rejects_non_injective():
    """Test that repeated images are rejected"""
    assert not is_induced_copy(complete_graph(3), path_graph(2), [1, 1])


@settings(max_examples=60, deadline=None)
@given(graphs(max_n=6), graphs(max_n=4), st.randoms(use_true_random=False))
def test_is_induced_copy_matches_networkx(host, pattern, rnd):
    """Test equivalence with an isomorphism check of the induced image"""
    if pattern.n > host.n:
        return
    mapping = rnd.sample(range(host.n), pattern.n)
    expected_graph = host.to_networkx().subgraph(mapping)
    relabelled = nx.relabel_nodes(pattern.to_networkx(), dict(enumerate(mapping)))
    expected = set(map(frozenset, expected_graph.edges())) == set(
        map(frozenset, relabelled.edges())
    )
    assert is_induced_copy(host, pattern, mapping) == expected


def test_edge_coloring_requires_total_coloring():
    """Test that a partial or out-of-range coloring is rejected"""
    g = path_graph(3)
    with pytest.raises(InvalidInputError):
        EdgeColoring(g, {(0, 1): 0}, 2)
    with pytest.raises(InvalidInputError):
        EdgeColoring(g, {(0, 1): 0, (1, 2): 2}, 2)
    with pytest.raises(InvalidInputError):
        EdgeColoring(g, {(0, 1): 0, (0, 2): 1}, 2)


def test_edge_coloring_class_views():
    """Test per-color adjacency and sequence form"""
    g = cycle_graph(4)
    coloring = EdgeColoring.from_sequence(g, [0, 1, 1, 0], 2)
    assert coloring.as_sequence() == (0, 1, 1, 0)
    assert coloring.class_graph(0).edge_count == 2
    assert coloring.color(3, 0) == coloring.color(0, 3)


def test_bipartite_pair_from_rows():
    """Test rows and columns of a pair built from bitmasks"""
    pair = BipartitePair.from_rows([0b01, 0b11], 2)
    assert pair.X == (0, 1) and pair.Y == (2, 3)
    assert pair.edge_count == 3
    assert pair.cols == (0b11, 0b10)
    assert pair.swapped().rows == pair.cols


def test_bipartite_pair_rejects_overlap():
    """Test that overlapping sides are rejected"""
    with pytest.raises(InvalidInputError):
        BipartitePair(complete_graph(3), (0, 1), (1, 2))


def test_construct_blowup_examples():
    """Test one-edge, 1-blowup and empty-gadget blowups"""
    edge = build_graph(2, [(0, 1)])
    b = construct_blowup(edge, [2, 2], complete_block)
    assert b.host == complete_bipartite_graph(2, 2)

    p3 = path_graph(3)
    assert construct_blowup(p3, [1, 1, 1], complete_block).host == p3

    b = construct_blowup(complete_graph(3), [2, 2, 2], empty_block)
    assert b.host == empty_graph(6)


def test_construct_blowup_dimension_mismatch():
    """Test that a wrongly shaped block is rejected"""
    edge = build_graph(2, [(0, 1)])
    with pytest.raises(InvalidInputError):
        construct_blowup(edge, [2, 2], lambda u, v, a, b: [0b1])
    with pytest.raises(InvalidInputError):
        construct_blowup(edge, [2, 2], lambda u, v, a, b: [0b111, 0])


def test_verify_blowup_accepts_constructed():
    """Test that constructed blowups verify"""
    b = construct_blowup(cycle_graph(5), [3, 2, 3, 1, 2], complete_block)
    verdict = verify_blowup(b, 3)
    assert verdict.ok
    assert verdict.violations == []


def test_verify_blowup_flags_intra_part_edge():
    """Test that an injected intra-part edge is reported"""
    b = construct_blowup(build_graph(2, [(0, 1)]), [2, 2], complete_block)
    host = build_graph(b.host.n, b.host.edges() + [(0, 1)])
    broken = Blowup(b.base, host, b.phi, b.parts, b.blocks)
    verdict = verify_blowup(broken, 2)
    assert not verdict.ok
    assert [0, 1] in [list(e) for e in verdict.offending_edges]


def test_verify_blowup_flags_large_part():
    """Test the part-size bound"""
    b = construct_blowup(build_graph(2, [(0, 1)]), [3, 2], complete_block)
    verdict = verify_blowup(b, 2)
    assert not verdict.ok
    assert any("part too large" in v for v in verdict.violations)


@settings(max_examples=40, deadline=None)
@given(
    graphs(max_n=5),
    st.lists(st.integers(0, 3), min_size=5, max_size=5),
    st.integers(0, 2**16),
)
def test_construct_then_verify(base, sizes, bits):
    """Test that construction followed by verification always succeeds"""
    sizes = sizes[: base.n]

    def provider(u, v, a, b):
        return [(bits >> i) & ((1 << b) - 1) for i in range(a)]

    b = construct_blowup(base, sizes, provider)
    assert verify_blowup(b, max(sizes, default=0)).ok
    assert b.host.n == sum(sizes)


def test_is_blowup_of_examples():
    """Test the cycle over an edge, the triangle and the 1-blowup identity"""
    edge = build_graph(2, [(0, 1)])
    phi = is_blowup_of(cycle_graph(4), edge, 2)
    assert phi is not None
    assert phi[0] == phi[2] and phi[1] == phi[3] and phi[0] != phi[1]

    assert is_blowup_of(complete_graph(3), edge, 5) is None
    assert is_blowup_of(complete_graph(3), complete_graph(3), 1) == (0, 1, 2)
    assert is_blowup_of(path_graph(3), path_graph(3), 1) == (0, 1, 2)


def test_is_blowup_of_cap():
    """Test the search cap on large patterns"""
    with pytest.raises(BudgetExceededError):
        is_blowup_of(empty_graph(17), empty_graph(1), 17)


def test_complete_blowup_structure():
    """Test the complete w-blowup of a path"""
    hprime, phi = complete_blowup(path_graph(3), 2)
    assert hprime.n == 6
    assert hprime.edge_count == 2 * 4
    assert check_blowup_map(hprime, path_graph(3), phi, 2)
    assert not check_blowup_map(hprime, path_graph(3), phi, 1)
    assert is_blowup_of(hprime, path_graph(3), 2, surjective=True) is not None


def test_json_round_trip_is_byte_stable():
    """Test that graphs and blowups serialise canonically"""
    g = cycle_graph(5)
    doc = canonical_json(graph_to_model(g))
    again = graph_from_model(GraphModel.model_validate_json(doc))
    assert again == g
    assert canonical_json(graph_to_model(again)) == doc

    b = construct_blowup(path_graph(3), [2, 1, 2], complete_block)
    model = blowup_to_model(b)
    rebuilt = blowup_from_model(model)
    assert rebuilt.host == b.host
    assert canonical_json(blowup_to_model(rebuilt)) == canonical_json(model)


def test_graph_from_networkx():
    """Test conversion from networkx"""
    g = Graph.from_networkx(nx.petersen_graph())
    assert g.n == 10 and g.edge_count == 15
    assert g.max_degree == 3
