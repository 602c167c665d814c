from __future__ import annotations

import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bearing_forms.errors import DuplicateEdge, EmptyEdgeSet, SelfLoop, VertexOutOfRange
from bearing_forms.graph import (build_graph, component_count, has_spanning_tree, incidence_matrix, is_acyclic,
                                 laplacian, min_rigid_edge_count, numerical_rank)

P4 = [(1, 2), (2, 3), (3, 4)]
C4 = [(1, 2), (2, 3), (3, 4), (1, 4)]


def test_single_edge():
    g = build_graph(2, [(2, 1)], 2)
    assert g.m == 1
    assert g.edges == ((1, 2),)
    np.testing.assert_array_equal(incidence_matrix(g), [[-1.0, 1.0]])


def test_edges_sorted_and_oriented_low_to_high():
    g = build_graph(4, [(4, 3), (2, 1), (3, 1)], 2)
    assert g.edges == ((1, 2), (1, 3), (3, 4))
    H = g.incidence
    assert H[1, 0] == -1 and H[1, 2] == 1


def test_path_is_acyclic_and_connected():
    g = build_graph(4, P4, 2)
    assert g.m == 3
    assert is_acyclic(g) and has_spanning_tree(g)


def test_cycle_not_acyclic():
    g = build_graph(4, C4, 2)
    assert has_spanning_tree(g) and not is_acyclic(g)


def test_two_isolated_edges_disconnected():
    g = build_graph(4, [(1, 2), (3, 4)], 2)
    assert not has_spanning_tree(g)
    assert numerical_rank(g.incidence)[0] == 2


@pytest.mark.parametrize("edges, exc", [
    ([(1, 2), (1, 2)], DuplicateEdge),
    ([(1, 2), (2, 1)], DuplicateEdge),
    ([(1, 1)], SelfLoop),
    ([(1, 5)], VertexOutOfRange),
    ([(0, 1)], VertexOutOfRange),
    ([], EmptyEdgeSet),
])
def test_validation(edges, exc):
    with pytest.raises(exc):
        build_graph(4, edges, 2)


def test_path_incidence_rank():
    assert numerical_rank(build_graph(4, P4, 2).incidence)[0] == 3


def test_path_laplacian_spectrum():
    # path Laplacian eigenvalues 2 - 2 cos(k pi / n), each repeated d times
    g = build_graph(4, P4, 2)
    ev = np.sort(np.linalg.eigvalsh(g.laplacian))
    expect = np.sort(np.repeat([2 - 2 * math.cos(k * math.pi / 4) for k in range(4)], 2))
    np.testing.assert_allclose(ev, expect, atol=1e-12)
    assert g.connectivity_eigenvalue == pytest.approx(2 - math.sqrt(2), abs=1e-12)
    assert g.incidence_norm_sq == pytest.approx(2 + math.sqrt(2), abs=1e-12)


def test_k2_laplacian_d3():
    ev = np.linalg.eigvalsh(build_graph(2, [(1, 2)], 3).laplacian)
    np.testing.assert_allclose(ev[3:], 2.0, atol=1e-12)
    np.testing.assert_allclose(ev[:3], 0.0, atol=1e-12)


def test_laplacian_matches_kron():
    g = build_graph(5, [(1, 2), (2, 3), (1, 4), (4, 5), (3, 5)], 3)
    Hb = np.kron(g.incidence, np.eye(3))
    np.testing.assert_allclose(laplacian(g), Hb.T @ Hb, atol=0)
    np.testing.assert_allclose(g.laplacian @ g.centroid_basis, 0.0, atol=1e-12)
    assert numerical_rank(g.laplacian)[0] == 3 * 5 - 3


@st.composite
def random_graphs(draw):
    n = draw(st.integers(2, 12))
    pairs = [(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)]
    edges = draw(st.lists(st.sampled_from(pairs), min_size=1, max_size=len(pairs), unique=True))
    d = draw(st.integers(2, 4))
    return build_graph(n, edges, d)


@settings(max_examples=80, deadline=None)
@given(random_graphs())
def test_incidence_properties_against_networkx(g):
    H = g.incidence
    assert np.all(H @ np.ones(g.n) == 0.0)
    G = nx.Graph()
    G.add_nodes_from(range(1, g.n + 1))
    G.add_edges_from(g.edges)
    k = nx.number_connected_components(G)
    assert component_count(g) == k
    assert numerical_rank(H)[0] == g.n - k
    assert has_spanning_tree(g) == nx.is_connected(G)
    assert is_acyclic(g) == nx.is_forest(G)


def _f_reference(n: int, d: int) -> int:
    if n <= d + 1:
        return n
    r = (n - 2) % (d - 1)
    return 1 + (n - 2) // (d - 1) * d + r + (1 if r > 0 else 0)


def test_min_rigid_edge_count_examples():
    assert min_rigid_edge_count(4, 3) == 4
    assert min_rigid_edge_count(4, 2) == 5
    assert min_rigid_edge_count(8, 3) == 10


@pytest.mark.parametrize("n", range(4, 21))
def test_min_rigid_edge_count_planar(n):
    assert min_rigid_edge_count(n, 2) == 2 * n - 3


@pytest.mark.parametrize("d", range(2, 7))
def test_min_rigid_edge_count_branch_agreement(d):
    n = d + 1
    r = (n - 2) % (d - 1)
    upper = 1 + (n - 2) // (d - 1) * d + r + int(np.sign(r))
    assert min_rigid_edge_count(n, d) == n == upper


@given(st.integers(2, 40), st.integers(2, 7))
def test_min_rigid_edge_count_reference(n, d):
    assert min_rigid_edge_count(n, d) == _f_reference(n, d)
