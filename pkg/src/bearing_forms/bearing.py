"""Bearings, orthogonal projectors and the bearing Laplacian."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import CoincidentAgents, NotUnitVector
from .graph import RANK_RTOL, FormationGraph

EPS_COINCIDENT = 1e-9
UNIT_TOL = 1e-9


def projector(y: ArrayLike) -> NDArray[np.float64]:
    """Orthogonal projector ``I - y y^T`` onto the complement of unit vector ``y``.

    Vectors within ``UNIT_TOL`` of unit length are renormalized first.
    """
    y = np.asarray(y, dtype=float).ravel()
    nrm = np.linalg.norm(y)
    if abs(nrm - 1.0) > UNIT_TOL:
        raise NotUnitVector(f"|y| = {nrm!r} is not 1")
    y = y / nrm
    return np.eye(y.size) - np.outer(y, y)


def bearing(p_i: ArrayLike, p_j: ArrayLike, eps: float = EPS_COINCIDENT,
            edge: tuple[int, int] = (0, 0)) -> NDArray[np.float64]:
    """Unit vector from ``p_i`` toward ``p_j``."""
    diff = np.asarray(p_j, dtype=float) - np.asarray(p_i, dtype=float)
    sep = float(np.linalg.norm(diff))
    if sep <= eps:
        raise CoincidentAgents(edge, sep)
    return diff / sep


def edge_vectors(g: FormationGraph, p: ArrayLike) -> NDArray[np.float64]:
    """Oriented edge vectors ``p_head - p_tail`` as an ``(m, d)`` array."""
    P = np.asarray(p, dtype=float).reshape(g.n, g.d)
    return P[g.heads] - P[g.tails]


def edge_bearings(g: FormationGraph, p: ArrayLike,
                  eps: float = EPS_COINCIDENT) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Per-edge unit bearings ``(m, d)`` and lengths ``(m,)``.

    Raises:
        CoincidentAgents: for the first edge shorter than ``eps``.
    """
    ev = edge_vectors(g, p)
    lengths = np.linalg.norm(ev, axis=1)
    bad = np.flatnonzero(lengths <= eps)
    if bad.size:
        k = int(bad[0])
        raise CoincidentAgents(g.edges[k], float(lengths[k]))
    return ev / lengths[:, None], lengths


@dataclass(frozen=True)
class BearingState:
    bearings: NDArray[np.float64]
    lengths: NDArray[np.float64]
    Pi: NDArray[np.float64]
    L_B: NDArray[np.float64]


def _block_projectors(G: NDArray[np.float64]) -> NDArray[np.float64]:
    d = G.shape[1]
    return np.eye(d)[None, :, :] - G[:, :, None] * G[:, None, :]


def bearing_laplacian_matrix(g: FormationGraph, G: NDArray[np.float64]) -> NDArray[np.float64]:
    """Assemble ``L_B`` edge by edge from unit bearings ``G`` of shape ``(m, d)``."""
    d, n = g.d, g.n
    projs = _block_projectors(G)
    L = np.zeros((n, d, n, d))
    for k in range(g.m):
        i, j, P = g.tails[k], g.heads[k], projs[k]
        L[i, :, i, :] += P
        L[j, :, j, :] += P
        L[i, :, j, :] -= P
        L[j, :, i, :] -= P
    return L.reshape(n * d, n * d)


def bearing_laplacian(g: FormationGraph, p: ArrayLike, eps: float = EPS_COINCIDENT) -> BearingState:
    """Bearing state of configuration ``p`` (stacked, length ``d*n``)."""
    G, lengths = edge_bearings(g, p, eps)
    projs = _block_projectors(G)
    m, d = g.m, g.d
    Pi = np.zeros((m * d, m * d))
    for k in range(m):
        Pi[k * d:(k + 1) * d, k * d:(k + 1) * d] = projs[k]
    return BearingState(bearings=G, lengths=lengths, Pi=Pi, L_B=bearing_laplacian_matrix(g, G))


@dataclass(frozen=True)
class RankReport:
    rank: int
    expected_rigid: int
    singular_values: NDArray[np.float64]
    null_basis: NDArray[np.float64]

    @property
    def gap(self) -> float:
        """Ratio between the last retained and first discarded singular value."""
        s = self.singular_values
        if self.rank == 0 or self.rank >= s.size:
            return float("inf")
        return float(s[self.rank - 1] / max(s[self.rank], np.finfo(float).tiny))


def bearing_laplacian_rank(state: BearingState | NDArray[np.float64], d: int | None = None,
                           tol: float = RANK_RTOL) -> RankReport:
    """Numerical rank of ``L_B`` with an orthonormal basis of its numerical null space."""
    if isinstance(state, BearingState):
        L_B, d = state.L_B, state.bearings.shape[1]
    elif d is None:
        raise TypeError("d is required when passing a bare matrix")
    else:
        L_B = np.asarray(state, dtype=float)
    _, s, Vt = np.linalg.svd(L_B)
    rank = int(np.count_nonzero(s > tol * s[0])) if s[0] > 0 else 0
    dn = L_B.shape[0]
    return RankReport(rank=rank, expected_rigid=dn - d - 1, singular_values=s,
                      null_basis=Vt[rank:].T.copy())
