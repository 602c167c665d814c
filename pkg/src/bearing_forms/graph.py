"""Undirected formation graphs, their incidence and Laplacian matrices.

Vertices are 1-indexed at every public boundary. Each edge ``{i, j}`` with
``i < j`` is oriented tail ``i`` -> head ``j`` and edges are sorted
lexicographically, which fixes the row order of the incidence matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from numpy.typing import NDArray

from .errors import DuplicateEdge, EmptyEdgeSet, GraphError, SelfLoop, VertexOutOfRange

RANK_RTOL = 1e-9


def numerical_rank(A: NDArray[np.floating], rtol: float = RANK_RTOL) -> tuple[int, NDArray[np.floating]]:
    """Rank from singular values above ``rtol * s_max``; also returns the singular values."""
    s = np.linalg.svd(np.atleast_2d(A), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0, s
    return int(np.count_nonzero(s > rtol * s[0])), s


@dataclass(frozen=True)
class FormationGraph:
    """Oriented undirected graph on vertices ``1..n`` living in ``R^d``.

    ``edges`` holds ``(tail, head)`` pairs with ``tail < head``, sorted.
    Build instances with :func:`build_graph` so validation runs.
    """

    n: int
    d: int
    edges: tuple[tuple[int, int], ...]

    @property
    def m(self) -> int:
        return len(self.edges)

    @cached_property
    def tails(self) -> NDArray[np.intp]:
        """0-based tail index per edge."""
        return np.array([e[0] - 1 for e in self.edges], dtype=np.intp)

    @cached_property
    def heads(self) -> NDArray[np.intp]:
        return np.array([e[1] - 1 for e in self.edges], dtype=np.intp)

    def neighbors(self, i: int) -> list[int]:
        """Sorted 1-indexed neighbor list of vertex ``i``."""
        out = [b for a, b in self.edges if a == i] + [a for a, b in self.edges if b == i]
        return sorted(out)

    def edge_index(self, i: int, j: int) -> int:
        """0-based row of edge ``{i, j}`` in the incidence matrix."""
        key = (min(i, j), max(i, j))
        try:
            return self.edges.index(key)
        except ValueError:
            raise GraphError(f"{{{i}, {j}}} is not an edge") from None

    @cached_property
    def incidence(self) -> NDArray[np.float64]:
        return incidence_matrix(self)

    @cached_property
    def lifted_incidence(self) -> NDArray[np.float64]:
        """``H kron I_d``, shape ``(d*m, d*n)``."""
        return np.kron(self.incidence, np.eye(self.d))

    @cached_property
    def laplacian(self) -> NDArray[np.float64]:
        return laplacian(self)

    @cached_property
    def laplacian_eigenvalues(self) -> NDArray[np.float64]:
        """Eigenvalues of ``L`` in non-increasing order."""
        return np.sort(np.linalg.eigvalsh(self.laplacian))[::-1]

    @property
    def incidence_norm_sq(self) -> float:
        """Spectral norm squared of the lifted incidence matrix, i.e. ``lambda_max(L)``."""
        return float(self.laplacian_eigenvalues[0])

    @property
    def connectivity_eigenvalue(self) -> float:
        """Smallest positive eigenvalue of ``L`` for a connected graph (``lambda_{dn-d}``)."""
        return float(self.laplacian_eigenvalues[self.d * self.n - self.d - 1])

    @cached_property
    def centroid_basis(self) -> NDArray[np.float64]:
        """``U = 1_n kron I_d``."""
        return np.kron(np.ones((self.n, 1)), np.eye(self.d))


def build_graph(n: int, edges: Iterable[Sequence[int]], d: int) -> FormationGraph:
    """Validate an edge list and return the lexicographically oriented graph.

    Raises:
        SelfLoop, DuplicateEdge, VertexOutOfRange, EmptyEdgeSet
    """
    if n < 2:
        raise GraphError(f"need at least 2 vertices, got n={n}")
    if d < 2:
        raise GraphError(f"need dimension d >= 2, got d={d}")
    seen: set[tuple[int, int]] = set()
    for e in edges:
        if len(e) != 2:
            raise GraphError(f"edge {e!r} is not a pair")
        i, j = int(e[0]), int(e[1])
        if i == j:
            raise SelfLoop(f"self-loop at vertex {i}")
        for v in (i, j):
            if not 1 <= v <= n:
                raise VertexOutOfRange(f"vertex {v} outside 1..{n}")
        key = (min(i, j), max(i, j))
        if key in seen:
            raise DuplicateEdge(f"edge {{{key[0]}, {key[1]}}} listed twice")
        seen.add(key)
    if not seen:
        raise EmptyEdgeSet("edge set is empty")
    return FormationGraph(n=n, d=d, edges=tuple(sorted(seen)))


def incidence_matrix(g: FormationGraph) -> NDArray[np.float64]:
    """Signed ``m x n`` incidence matrix: -1 at the tail, +1 at the head."""
    H = np.zeros((g.m, g.n))
    rows = np.arange(g.m)
    H[rows, g.tails] = -1.0
    H[rows, g.heads] = 1.0
    return H


def laplacian(g: FormationGraph) -> NDArray[np.float64]:
    """Lifted graph Laplacian ``L = Hbar^T Hbar`` of shape ``(dn, dn)``."""
    Hb = g.lifted_incidence
    return Hb.T @ Hb


def _components(g: FormationGraph) -> int:
    parent = list(range(g.n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    count = g.n
    for a, b in g.edges:
        ra, rb = find(a - 1), find(b - 1)
        if ra != rb:
            parent[ra] = rb
            count -= 1
    return count


def component_count(g: FormationGraph) -> int:
    return _components(g)


def has_spanning_tree(g: FormationGraph) -> bool:
    """True iff the graph is connected."""
    return _components(g) == 1


def is_acyclic(g: FormationGraph) -> bool:
    # a forest has exactly n - (#components) edges
    return g.m == g.n - _components(g)


def min_rigid_edge_count(n: int, d: int) -> int:
    """Minimal edge count for which ``rank(L_B) = dn - d - 1`` is attainable."""
    if n < 2 or d < 2:
        raise GraphError(f"need n >= 2 and d >= 2, got n={n}, d={d}")
    if n <= d + 1:
        return n
    r = (n - 2) % (d - 1)
    return 1 + ((n - 2) // (d - 1)) * d + r + (1 if r > 0 else 0)
