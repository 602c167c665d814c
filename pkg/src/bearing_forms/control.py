"""Distributed bearing-only control laws.

``control_single`` and ``control_double`` evaluate one agent's command from data
that agent can sense: bearings to its neighbors, the desired relative positions,
its own velocity and its own feedforward. ``formation_feedback`` computes the same
neighbor sums for every agent at once, edge by edge, for the simulation engine.
"""

from __future__ import annotations

from typing import Mapping

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .bearing import EPS_COINCIDENT
from .errors import BearingLoss, CoincidentAgents
from .graph import FormationGraph


def _neighbor_sum(bearings: Mapping[int, ArrayLike], desired_rel: Mapping[int, ArrayLike]) -> NDArray[np.float64]:
    total = None
    for j, g in bearings.items():
        g = np.asarray(g, dtype=float)
        pij = np.asarray(desired_rel[j], dtype=float)
        term = pij - g * (g @ pij)
        total = term if total is None else total + term
    if total is None:
        raise ValueError("agent has no neighbors")
    return total


def control_single(bearings: Mapping[int, ArrayLike], desired_rel: Mapping[int, ArrayLike],
                   v_star: ArrayLike, k_p: float) -> NDArray[np.float64]:
    """Velocity command ``-k_p * sum_j pi_{g_ij} p*_ij + v_i*``.

    Args:
        bearings: neighbor id -> measured unit bearing ``g_ij``.
        desired_rel: neighbor id -> desired relative position ``p*_j - p*_i``.
        v_star: this agent's desired velocity.
        k_p: positive gain.
    """
    return -k_p * _neighbor_sum(bearings, desired_rel) + np.asarray(v_star, dtype=float)


def control_double(bearings: Mapping[int, ArrayLike], desired_rel: Mapping[int, ArrayLike],
                   v_err: ArrayLike, u_star: ArrayLike, k_p: float, k_d: float) -> NDArray[np.float64]:
    """Acceleration command ``-k_p * sum_j pi_{g_ij} p*_ij - k_d * v~_i + u_i*``."""
    return (-k_p * _neighbor_sum(bearings, desired_rel) - k_d * np.asarray(v_err, dtype=float)
            + np.asarray(u_star, dtype=float))


def local_view(g: FormationGraph, i: int, p: ArrayLike, p_star: ArrayLike,
               eps: float = EPS_COINCIDENT) -> tuple[dict[int, NDArray], dict[int, NDArray]]:
    """What agent ``i`` (1-indexed) senses: bearings and desired relative positions per neighbor."""
    P = np.asarray(p, dtype=float).reshape(g.n, g.d)
    Ps = np.asarray(p_star, dtype=float).reshape(g.n, g.d)
    bearings, rel = {}, {}
    for j in g.neighbors(i):
        diff = P[j - 1] - P[i - 1]
        sep = float(np.linalg.norm(diff))
        if sep <= eps:
            raise CoincidentAgents((min(i, j), max(i, j)), sep)
        bearings[j] = diff / sep
        rel[j] = Ps[j - 1] - Ps[i - 1]
    return bearings, rel


def formation_feedback(g: FormationGraph, p: NDArray[np.float64], p_star: NDArray[np.float64],
                       t: float = 0.0, eps: float = EPS_COINCIDENT) -> tuple[NDArray[np.float64], float]:
    """Per-agent ``-sum_j pi_{g_ij} p*_ij`` stacked, plus the smallest edge separation.

    Raises:
        BearingLoss: when an edge is shorter than ``eps``.
    """
    P = p.reshape(g.n, g.d)
    Ps = p_star.reshape(g.n, g.d)
    E = P[g.heads] - P[g.tails]
    lens = np.sqrt(np.einsum("ij,ij->i", E, E))
    k = int(np.argmin(lens))
    if lens[k] <= eps:
        raise BearingLoss(t, g.edges[k], float(lens[k]))
    G = E / lens[:, None]
    Es = Ps[g.heads] - Ps[g.tails]
    W = Es - G * np.einsum("ij,ij->i", G, Es)[:, None]
    # tail i sees p*_ij = +Es, head j sees p*_ji = -Es with the same projector
    return (g.incidence.T @ W).ravel(), float(lens[k])


def apply_bearing_laplacian(g: FormationGraph, p: NDArray[np.float64], x: NDArray[np.float64],
                            t: float = 0.0, eps: float = EPS_COINCIDENT) -> tuple[NDArray[np.float64], float]:
    """``L_B(p) @ x`` without assembling ``L_B``; also returns the smallest edge separation."""
    P = p.reshape(g.n, g.d)
    X = x.reshape(g.n, g.d)
    E = P[g.heads] - P[g.tails]
    lens = np.sqrt(np.einsum("ij,ij->i", E, E))
    k = int(np.argmin(lens))
    if lens[k] <= eps:
        raise BearingLoss(t, g.edges[k], float(lens[k]))
    G = E / lens[:, None]
    D = X[g.heads] - X[g.tails]
    W = D - G * np.einsum("ij,ij->i", G, D)[:, None]
    return (g.incidence.T @ W).ravel(), float(lens[k])
