"""Persistence-of-excitation certificates for directions, projector sums and bearing Laplacians.

A certificate fixes one window length ``T`` and scans window start times over a
finite horizon with stride equal to the quadrature step, keeping the worst window.
Results are therefore *horizon-certified*, never proofs for all ``t``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
from numpy.typing import NDArray

from .bearing import EPS_COINCIDENT, UNIT_TOL, bearing_laplacian_matrix, bearing_laplacian_rank, edge_bearings
from .errors import (
    BaseNotBPE,
    DisconnectedGraph,
    EmptyDirectionSet,
    InvalidNewEdges,
    InvalidWindow,
    NotAcyclic,
    NotUnitVector,
    RankHypothesisFails,
    TooFewEdges,
)
from .graph import FormationGraph, build_graph, has_spanning_tree, is_acyclic, min_rigid_edge_count
from .trajectory import append_agent

MU_MIN = 1e-3
STEPS_PER_WINDOW = 200
RANGE_RTOL = 1e-9

MatrixFn = Callable[[float], NDArray[np.float64]]


@dataclass(frozen=True)
class PECertificate:
    kind: str
    T: float
    mu: float
    mu_min: float
    step: float
    horizon: float
    window_starts: NDArray[np.float64] = field(repr=False)
    window_minima: NDArray[np.float64] = field(repr=False)
    label: str = "horizon-certified"

    @property
    def is_pe(self) -> bool:
        return self.mu >= self.mu_min

    @property
    def worst_start(self) -> float:
        return float(self.window_starts[int(np.argmin(self.window_minima))])

    def summary(self) -> str:
        verdict = "PE" if self.is_pe else "not PE"
        return (f"{self.kind}: T={self.T:g} s, mu={self.mu:.6g} (min {self.mu_min:g}) -> {verdict} "
                f"[{self.label}, horizon {self.horizon:g} s, step {self.step:.4g} s]")


def _simpson_weights(N: int, h: float) -> NDArray[np.float64]:
    w = np.ones(N + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * (h / 3.0)


def _intervals(T: float, step: float) -> tuple[int, float]:
    if not T > 0:
        raise InvalidWindow(f"window length must be positive, got T={T}")
    if not 0 < step <= T / 10.0 * (1 + 1e-12):
        raise InvalidWindow(f"quadrature step {step} must lie in (0, T/10]")
    N = math.ceil(T / step - 1e-9)
    N += N % 2
    return N, T / N


def window_average(M: MatrixFn, t: float, T: float, step: float) -> NDArray[np.float64]:
    """Composite Simpson estimate of ``(1/T) * int_t^{t+T} M(tau) dtau``.

    The step is shrunk so that an even number of intervals covers the window.
    """
    N, h = _intervals(T, step)
    w = _simpson_weights(N, h)
    acc = None
    for k in range(N + 1):
        term = w[k] * np.asarray(M(t + k * h), dtype=float)
        acc = term if acc is None else acc + term
    return acc / T


def _scan(samples: NDArray[np.float64], N: int, h: float, T: float, n_starts: int,
          reduce: Callable[[NDArray[np.float64]], float]) -> NDArray[np.float64]:
    w = _simpson_weights(N, h) / T
    out = np.empty(n_starts)
    for s in range(n_starts):
        avg = np.tensordot(w, samples[s:s + N + 1], axes=1)
        out[s] = reduce(avg)
    return out


def _resolve_horizon(T: float, horizon: float | None, period: float | None) -> float:
    if horizon is not None:
        return float(horizon)
    if period is not None:
        return float(period)
    return 3.0 * T


def _grid(T: float, step: float | None, horizon: float, periodic: bool) -> tuple[int, float, int]:
    N, h = _intervals(T, step if step is not None else T / STEPS_PER_WINDOW)
    # periodic: starts cover [0, period) exactly once; otherwise [0, horizon]
    n_starts = int(math.floor(horizon / h + 1e-9)) + (0 if periodic else 1)
    return N, h, max(n_starts, 1)


def _certify(kind: str, F: MatrixFn, reduce, T, mu_min, horizon, step, period) -> PECertificate:
    hz = _resolve_horizon(T, horizon, period)
    periodic = horizon is None and period is not None
    N, h, n_starts = _grid(T, step, hz, periodic)
    ts = np.arange(n_starts + N) * h
    samples = np.stack([F(t) for t in ts])
    minima = _scan(samples, N, h, T, n_starts, reduce)
    return PECertificate(kind=kind, T=T, mu=float(minima.min()), mu_min=mu_min, step=h, horizon=hz,
                         window_starts=ts[:n_starts], window_minima=minima)


def _lam_min(A: NDArray[np.float64]) -> float:
    return float(np.linalg.eigvalsh(0.5 * (A + A.T))[0])


def _unit(y: NDArray[np.float64]) -> NDArray[np.float64]:
    y = np.asarray(y, dtype=float).ravel()
    nrm = np.linalg.norm(y)
    if abs(nrm - 1.0) > UNIT_TOL:
        raise NotUnitVector(f"|y| = {nrm!r} is not 1")
    return y / nrm


def _proj(y: NDArray[np.float64]) -> NDArray[np.float64]:
    return np.eye(y.size) - np.outer(y, y)


def certify_direction_pe(y: Callable[[float], NDArray[np.float64]], T: float, mu_min: float = MU_MIN,
                         horizon: float | None = None, step: float | None = None,
                         period: float | None = None) -> PECertificate:
    """Worst-window ``lambda_min`` of the averaged projector ``pi_{y(t)}``."""
    return _certify("direction", lambda t: _proj(_unit(y(t))), _lam_min, T, mu_min, horizon, step, period)


@dataclass(frozen=True)
class ProjectorSumReport:
    certificate: PECertificate
    pe_members: list[int]
    best_pair: tuple[int, int] | None
    eps1: float
    condition: int | None

    @property
    def is_pe(self) -> bool:
        return self.certificate.is_pe


def certify_projector_sum_pe(directions: Sequence[Callable[[float], NDArray[np.float64]]], T: float,
                             mu_min: float = MU_MIN, horizon: float | None = None,
                             step: float | None = None, period: float | None = None) -> ProjectorSumReport:
    """Certificate for ``sum_i pi_{y_i(t)}`` plus which sufficient condition holds.

    ``condition`` is 1 when some member direction is PE on its own, 2 when two
    directions stay uniformly non-collinear (``|y_i . y_j| <= 1 - eps1``), else None.
    Members are 0-based indices into ``directions``.
    """
    if not directions:
        raise EmptyDirectionSet("need at least one direction")
    ys = list(directions)

    def Q(t: float) -> NDArray[np.float64]:
        return sum(_proj(_unit(y(t))) for y in ys)

    cert = _certify("projector-sum", Q, _lam_min, T, mu_min, horizon, step, period)
    members = [i for i, y in enumerate(ys)
               if certify_direction_pe(y, T, mu_min, horizon, step, period).is_pe]

    best, eps1 = None, 0.0
    ts = np.arange(cert.window_starts.size + round(cert.T / cert.step)) * cert.step
    for i, j in itertools.combinations(range(len(ys)), 2):
        worst = max(abs(float(_unit(ys[i](t)) @ _unit(ys[j](t)))) for t in ts)
        if 1.0 - worst > eps1:
            best, eps1 = (i, j), 1.0 - worst
    if members:
        cond = 1
    elif best is not None and eps1 > 1e-9:
        cond = 2
    else:
        cond = None
    return ProjectorSumReport(cert, members, best, eps1, cond)


def _range_basis(L: NDArray[np.float64]) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    lam, V = np.linalg.eigh(L)
    keep = lam > RANGE_RTOL * lam[-1]
    return V[:, keep], lam[keep]


def generalized_min_on_range(M: NDArray[np.float64], L: NDArray[np.float64]) -> float:
    """Smallest eigenvalue of the pencil ``(M, L)`` restricted to ``range(L)``."""
    V, lam = _range_basis(L)
    A = V.T @ M @ V
    return float(scipy.linalg.eigh(0.5 * (A + A.T), np.diag(lam), eigvals_only=True)[0])


def _laplacian_fn(g: FormationGraph, traj) -> MatrixFn:
    def F(t: float) -> NDArray[np.float64]:
        G, _ = edge_bearings(g, traj.positions(t))
        return bearing_laplacian_matrix(g, G)
    return F


def certify_bearing_laplacian_pe(g: FormationGraph, traj, T: float, mu_min: float = MU_MIN,
                                 horizon: float | None = None, step: float | None = None) -> PECertificate:
    """Worst-window generalized eigenvalue of (window-averaged ``L_B``, ``L``) on ``range(L)``.

    Raises:
        DisconnectedGraph: when the graph has no spanning tree.
        CoincidentAgents: when a desired bearing is undefined at some sample.
    """
    if not has_spanning_tree(g):
        raise DisconnectedGraph("bearing-Laplacian PE is measured against L, which needs a connected graph")
    V, lam = _range_basis(g.laplacian)
    inv_sqrt = 1.0 / np.sqrt(lam)
    # V^T M V scaled by Lambda^{-1/2} on both sides turns the pencil into a standard problem
    W = V * inv_sqrt

    def reduce(M: NDArray[np.float64]) -> float:
        A = W.T @ M @ W
        return float(np.linalg.eigvalsh(0.5 * (A + A.T))[0])

    return _certify("bearing-laplacian", _laplacian_fn(g, traj), reduce, T, mu_min, horizon, step,
                    getattr(traj, "period", None))


def static_laplacian_mu(g: FormationGraph, p: NDArray[np.float64]) -> float:
    """Generalized eigenvalue for a frozen configuration (no quadrature)."""
    G, _ = edge_bearings(g, p)
    return generalized_min_on_range(bearing_laplacian_matrix(g, G), g.laplacian)


@dataclass(frozen=True)
class BPEVerdict:
    bpe: bool
    spanning_tree: bool
    certificate: PECertificate | None

    def __bool__(self) -> bool:
        return self.bpe


def is_bpe(g: FormationGraph, traj, T: float, mu_min: float = MU_MIN, horizon: float | None = None,
           step: float | None = None) -> BPEVerdict:
    if not has_spanning_tree(g):
        return BPEVerdict(False, False, None)
    cert = certify_bearing_laplacian_pe(g, traj, T, mu_min, horizon, step)
    return BPEVerdict(cert.is_pe, True, cert)


def edge_bearing_fn(g: FormationGraph, traj, k: int) -> Callable[[float], NDArray[np.float64]]:
    """Desired bearing of edge row ``k`` (0-based) as a function of time."""
    i, j, d = int(g.tails[k]), int(g.heads[k]), g.d

    def y(t: float) -> NDArray[np.float64]:
        P = traj.positions(t).reshape(g.n, d)
        diff = P[j] - P[i]
        return diff / np.linalg.norm(diff)
    return y


@dataclass(frozen=True)
class EdgePEReport:
    per_edge: list[tuple[tuple[int, int], PECertificate]]

    @property
    def pe_edges(self) -> list[tuple[int, int]]:
        return [e for e, c in self.per_edge if c.is_pe]

    @property
    def offending_edges(self) -> list[tuple[int, int]]:
        return [e for e, c in self.per_edge if not c.is_pe]


def edge_pe_table(g: FormationGraph, traj, T: float, mu_min: float = MU_MIN,
                  horizon: float | None = None, step: float | None = None) -> EdgePEReport:
    period = getattr(traj, "period", None)
    rows = [(g.edges[k], certify_direction_pe(edge_bearing_fn(g, traj, k), T, mu_min, horizon, step, period))
            for k in range(g.m)]
    return EdgePEReport(rows)


@dataclass(frozen=True)
class AcyclicBPEReport:
    edges: EdgePEReport
    bpe: bool
    cross_check: BPEVerdict | None


def acyclic_bpe_check(g: FormationGraph, traj, T: float, mu_min: float = MU_MIN,
                      horizon: float | None = None, step: float | None = None,
                      cross_check: bool = False) -> AcyclicBPEReport:
    """Tree formations are BPE exactly when every edge bearing is PE."""
    if not is_acyclic(g):
        raise NotAcyclic(f"graph has {g.m} edges on {g.n} vertices and contains a cycle")
    if not has_spanning_tree(g):
        raise DisconnectedGraph("acyclic check needs a spanning tree")
    table = edge_pe_table(g, traj, T, mu_min, horizon, step)
    verdict = not table.offending_edges
    cc = is_bpe(g, traj, T, mu_min, horizon, step) if cross_check else None
    return AcyclicBPEReport(table, verdict, cc)


def min_pe_bearing_lower_bound(m: int, n: int, d: int) -> int:
    """Lower bound on how many bearings must be PE for a BPE formation with ``m`` edges."""
    if m < n - 1:
        raise TooFewEdges(f"m={m} < n-1={n - 1}: no spanning tree possible")
    f = min_rigid_edge_count(n, d)
    if m >= f:
        return 1
    j = f - m
    return (d - 1) * j - (d - 1) * f + d * n - d


@dataclass(frozen=True)
class VertexAdditionResult:
    graph: FormationGraph
    trajectory: object
    new_edge_report: ProjectorSumReport
    bpe: bool
    cross_check: BPEVerdict | None


def vertex_addition(g: FormationGraph, traj, new_agent: Callable[[float], NDArray[np.float64]],
                    neighbors: Sequence[int], T: float, mu_min: float = MU_MIN,
                    horizon: float | None = None, step: float | None = None,
                    base_certificate: BPEVerdict | None = None, cross_check: bool = False,
                    period: float | None = None) -> VertexAdditionResult:
    """Attach agent ``n+1`` to ``neighbors`` and certify the extension from the new edges alone.

    Raises:
        BaseNotBPE: the base formation does not certify as BPE.
        InvalidNewEdges: empty, duplicate or out-of-range neighbor list.
    """
    nbrs = [int(v) for v in neighbors]
    if not nbrs or len(set(nbrs)) != len(nbrs) or any(not 1 <= v <= g.n for v in nbrs):
        raise InvalidNewEdges(f"new agent must connect to distinct existing vertices, got {nbrs}")
    base = base_certificate if base_certificate is not None else is_bpe(g, traj, T, mu_min, horizon, step)
    if not base.bpe:
        raise BaseNotBPE("base formation is not certified BPE")

    l = g.n + 1
    g2 = build_graph(l, list(g.edges) + [(v, l) for v in nbrs], g.d)
    traj2 = append_agent(traj, new_agent, period)
    ks = [g2.edge_index(v, l) for v in nbrs]
    report = certify_projector_sum_pe([edge_bearing_fn(g2, traj2, k) for k in ks], T, mu_min, horizon, step,
                                      traj2.period)
    cc = is_bpe(g2, traj2, T, mu_min, horizon, step) if cross_check else None
    return VertexAdditionResult(g2, traj2, report, report.is_pe, cc)


@dataclass(frozen=True)
class RankBPEReport:
    bpe: bool
    pe_edges: list[tuple[int, int]]
    edges: EdgePEReport
    cross_check: BPEVerdict | None


def check_rank_hypothesis(g: FormationGraph, traj, times: NDArray[np.float64]) -> None:
    expected = g.d * g.n - g.d - 1
    for t in times:
        G, _ = edge_bearings(g, traj.positions(float(t)))
        r = bearing_laplacian_rank(bearing_laplacian_matrix(g, G), d=g.d).rank
        if r != expected:
            raise RankHypothesisFails(float(t), r, expected)


def rank_based_bpe_check(g: FormationGraph, traj, T: float, mu_min: float = MU_MIN,
                         horizon: float | None = None, step: float | None = None,
                         cross_check: bool = True) -> RankBPEReport:
    """Under full bearing rank at every sample, BPE reduces to one PE bearing.

    The cross-check against :func:`is_bpe` is reported as-is; for static rigid
    formations the two legitimately disagree.
    """
    period = getattr(traj, "period", None)
    hz = _resolve_horizon(T, horizon, period)
    N, h, n_starts = _grid(T, step, hz, horizon is None and period is not None)
    check_rank_hypothesis(g, traj, np.arange(n_starts + N) * h)
    table = edge_pe_table(g, traj, T, mu_min, horizon, step)
    cc = is_bpe(g, traj, T, mu_min, horizon, step) if cross_check else None
    return RankBPEReport(bool(table.pe_edges), table.pe_edges, table, cc)


def rank_history(g: FormationGraph, traj, times: NDArray[np.float64]) -> NDArray[np.int64]:
    out = []
    for t in times:
        G, _ = edge_bearings(g, traj.positions(float(t)), EPS_COINCIDENT)
        out.append(bearing_laplacian_rank(bearing_laplacian_matrix(g, G), d=g.d).rank)
    return np.array(out)
