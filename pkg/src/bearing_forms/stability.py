"""Gain validation, basin radii, exponential-rate bounds and the block-matrix constant ``c``.

All matrix norms are spectral: ``||H_bar||^2`` is ``lambda_max(L)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import linalg as sla

from .bearing import bearing_laplacian
from .errors import GainConditionViolated, InvalidGain, InvalidInput, NonPositiveSamples
from .graph import FormationGraph

PSD_TOL = 1e-9


@dataclass(frozen=True)
class GainSet:
    k_p: float
    k_d: float | None = None

    def __post_init__(self):
        if not self.k_p > 0:
            raise InvalidGain(f"k_p must be positive, got {self.k_p}")
        if self.k_d is not None and not self.k_d > 0:
            raise InvalidGain(f"k_d must be positive, got {self.k_d}")


@dataclass(frozen=True)
class GainCheck:
    ok: bool
    margin: float
    required_kd: float
    norm_sq: float

    def __bool__(self) -> bool:
        return self.ok


def validate_gains(g: FormationGraph, k_p: float, k_d: float) -> GainCheck:
    """Check ``k_d > k_p/4 ||H_bar||^2 + 1``; the margin is ``k_d`` minus the threshold."""
    h2 = g.incidence_norm_sq
    req = 0.25 * k_p * h2 + 1.0
    return GainCheck(ok=k_d > req, margin=k_d - req, required_kd=req, norm_sq=h2)


# --- basins ----------------------------------------------------------------

def _sample_times(traj, horizon: float | None, dt: float | None) -> NDArray[np.float64]:
    if horizon is None:
        horizon = getattr(traj, "t_max", None) or max(3.0 * (getattr(traj, "period", None) or 0.0), 10.0)
    if dt is None:
        dt = horizon / 2000.0
    return np.linspace(0.0, horizon, int(round(horizon / dt)) + 1)


def min_desired_separation(g: FormationGraph, traj, horizon: float | None = None,
                           dt: float | None = None) -> float:
    """``min_t min_k ||p_bar_k*(t)||`` over a uniform sample of ``[0, horizon]``.

    With no horizon, the trajectory's ``t_max`` is used if set, else the longer of
    three bearing periods and 10 s. Scale and translation need not share the
    bearing period, so the value is horizon-dependent in general.
    """
    best = math.inf
    for t in _sample_times(traj, horizon, dt):
        P = traj.positions(float(t)).reshape(g.n, g.d)
        E = P[g.heads] - P[g.tails]
        best = min(best, float(np.sqrt(np.einsum("ij,ij->i", E, E)).min()))
    return best


def basin_radius_single(g: FormationGraph, traj, horizon: float | None = None, dt: float | None = None) -> float:
    return 0.5 * min_desired_separation(g, traj, horizon, dt)


def lyapunov_matrix_eigs(k_d: float) -> tuple[float, float]:
    """Eigenvalues of ``1/2 [[k_d, 1], [1, 1]]`` (each with multiplicity ``dn`` in ``P``)."""
    r = math.sqrt((k_d - 1.0) ** 2 + 4.0)
    return ((k_d + 1.0) + r) / 4.0, ((k_d + 1.0) - r) / 4.0


@dataclass(frozen=True)
class DoubleBasin:
    radius: float
    b: float
    lam_max: float
    lam_min: float


def basin_radius_double(g: FormationGraph, traj, k_d: float, horizon: float | None = None,
                        dt: float | None = None, min_sep: float | None = None) -> DoubleBasin:
    """Radius on ``||[p~; v~]||`` with ``b = max(sqrt(lmax/lmin), sqrt 2)``.

    Raises:
        InvalidGain: for ``k_d <= 1``.
    """
    if k_d <= 1.0:
        raise InvalidGain(f"k_d must exceed 1 for a positive definite P, got {k_d}")
    lmax, lmin = lyapunov_matrix_eigs(k_d)
    b = max(math.sqrt(lmax / lmin), math.sqrt(2.0))
    if min_sep is None:
        min_sep = min_desired_separation(g, traj, horizon, dt)
    return DoubleBasin(radius=min_sep / (2.0 * b), b=b, lam_max=lmax, lam_min=lmin)


# --- rate bound ------------------------------------------------------------

def gamma_single(k_p: float, err0: float, min_sep: float) -> float:
    """Lower bound on the feedback gain seen along a single-integrator run."""
    return k_p * (1.0 - 2.0 * err0 / (2.0 * err0 + min_sep)) ** 2


def lambda_M(g: FormationGraph, k_p: float, k_d: float) -> float:
    h2 = g.incidence_norm_sq
    return (k_p * (k_d - 1.0) - 0.25 * k_p * k_p * h2) / (k_d - 1.0 + k_p)


def gamma_double(g: FormationGraph, k_p: float, k_d: float, x0: float, b: float, min_sep: float) -> float:
    """``lambda_M (1 - 2 b x0 / (2 b x0 + min_sep))^2`` with ``x0 = ||[p~(0); v~(0)]||``."""
    return lambda_M(g, k_p, k_d) * (1.0 - 2.0 * b * x0 / (2.0 * b * x0 + min_sep)) ** 2


@dataclass(frozen=True)
class StabilityBound:
    sigma: float
    rho: float
    decay: float
    amplitude: float
    lam1: float
    lam2: float
    lam_sigma: float
    gamma: float
    mu: float
    T: float
    c: float


def rate_bound(lam1: float, lam2: float, lam_sigma: float, gamma: float, mu: float, T: float,
               c: float) -> StabilityBound:
    """Per-window contraction ``sigma``, exponent ``sigma/(2T)`` and amplitude of the envelope.

    Raises:
        InvalidInput: a non-positive input, or ``mu > lam_sigma``.
    """
    vals = dict(lam1=lam1, lam2=lam2, lam_sigma=lam_sigma, gamma=gamma, mu=mu, T=T, c=c)
    bad = [k for k, v in vals.items() if not (np.isfinite(v) and v > 0)]
    if bad:
        raise InvalidInput(f"inputs must be positive and finite: {', '.join(bad)}")
    if mu > lam_sigma:
        raise InvalidInput(f"mu={mu} exceeds lam_sigma={lam_sigma}")
    rho = lam2 / (mu * T * gamma)
    sigma = 1.0 / ((1.0 + rho) * (1.0 + rho * c * T * T * gamma * lam_sigma))
    return StabilityBound(sigma=sigma, rho=rho, decay=sigma / (2.0 * T),
                          amplitude=math.sqrt(lam2 / (lam1 * (1.0 - sigma))),
                          lam1=lam1, lam2=lam2, lam_sigma=lam_sigma, gamma=gamma, mu=mu, T=T, c=c)


def sup_bearing_laplacian_norm(g: FormationGraph, traj, horizon: float | None = None,
                               dt: float | None = None) -> float:
    best = 0.0
    for t in _sample_times(traj, horizon, dt):
        LB = bearing_laplacian(g, traj.positions(float(t))).L_B
        best = max(best, float(np.linalg.eigvalsh(LB)[-1]))
    return best


def certified_single_bound(g: FormationGraph, traj, cert, k_p: float, err0: float,
                           horizon: float | None = None) -> StabilityBound:
    """Envelope for ``||delta||`` under the single-integrator law.

    ``cert`` is a bearing-Laplacian PE certificate (window average ``>= mu L``),
    converted to an identity-relative level through ``lambda_{dn-d}(L)``.
    """
    min_sep = min_desired_separation(g, traj, horizon)
    return rate_bound(lam1=0.5, lam2=0.5,
                      lam_sigma=sup_bearing_laplacian_norm(g, traj, horizon, dt=cert.step),
                      gamma=gamma_single(k_p, err0, min_sep),
                      mu=cert.mu * g.connectivity_eigenvalue, T=cert.T,
                      c=k_p * g.incidence_norm_sq)


# --- constant c --------------------------------------------------------------

def lemma8_matrices(g: FormationGraph, k_p: float, k_d: float) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """``(M_Q, M_A)`` on the stacked ``(edge, agent)`` space of size ``dm + dn``."""
    Hb = g.lifted_incidence
    dm, dn = Hb.shape
    MQ = np.block([[k_p * np.eye(dm), 0.5 * k_p * Hb], [0.5 * k_p * Hb.T, (k_d - 1.0) * np.eye(dn)]])
    MA = np.block([[k_p * k_p * (Hb @ Hb.T), k_p * k_d * Hb], [k_p * k_d * Hb.T, (1.0 + k_d * k_d) * np.eye(dn)]])
    return MQ, MA


@dataclass(frozen=True)
class Lemma8Result:
    c: float
    floor: float
    root: float | None
    exact: float
    min_eig: float


def lemma8_c(g: FormationGraph, k_p: float, k_d: float) -> Lemma8Result:
    """Smallest ``c`` meeting both the quadratic inequality and the floor.

    ``exact`` is ``lambda_max(M_A, M_Q)``, the true infimum of admissible ``c``,
    reported for comparison; ``min_eig`` is ``lambda_min(c M_Q - M_A)``.

    Raises:
        GainConditionViolated: the damping gain is too small for ``M_Q > 0``.
    """
    chk = validate_gains(g, k_p, k_d)
    if not chk.ok:
        raise GainConditionViolated(f"k_d={k_d} must exceed {chk.required_kd:.6g}")
    h2 = chk.norm_sq
    floor = max(k_p * h2, (k_d * k_d + 1.0) / (k_d - 1.0))
    a = k_p * k_d - k_p - 0.25 * k_p * k_p * h2
    bq = -(k_p * k_d * k_d + k_p - k_p * k_p * h2)
    cq = k_p * k_p * h2
    disc = bq * bq - 4.0 * a * cq
    root = None
    c = floor
    if disc > 0:
        root = (-bq + math.sqrt(disc)) / (2.0 * a)
        c = max(floor, root)
    MQ, MA = lemma8_matrices(g, k_p, k_d)
    exact = float(sla.eigh(MA, MQ, eigvals_only=True)[-1])
    min_eig = float(np.linalg.eigvalsh(c * MQ - MA)[0])
    if min_eig < -PSD_TOL * max(1.0, c * np.linalg.norm(MQ, 2)):
        raise ArithmeticError(f"c={c} leaves c M_Q - M_A indefinite (lambda_min={min_eig})")
    return Lemma8Result(c=c, floor=floor, root=root, exact=exact, min_eig=min_eig)


# --- empirical rate ----------------------------------------------------------

_FIELDS = ("err_p", "err_delta", "err_v")


def fit_exponential_rate(t, values: ArrayLike | str | None = None,
                         window: tuple[float, float] | None = None) -> tuple[float, float]:
    """Least-squares decay rate ``-d log(y)/dt`` and its ``R^2``.

    Accepts either ``(t, y)`` arrays or ``(trace, field_name)``.

    Raises:
        NonPositiveSamples: when any sample in the window is not positive.
    """
    if hasattr(t, "t") and (values is None or isinstance(values, str)):
        field = values or "err_delta"
        if field not in _FIELDS:
            raise ValueError(f"unknown field {field!r}")
        t, y = t.t, getattr(t, field)
    else:
        y = values
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if window is not None:
        sel = (t >= window[0]) & (t <= window[1])
        t, y = t[sel], y[sel]
    if len(t) < 2:
        raise ValueError("need at least two samples")
    if np.any(~(y > 0)):
        raise NonPositiveSamples("log-linear fit needs strictly positive samples")
    ly = np.log(y)
    slope, icpt = np.polyfit(t, ly, 1)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    ss_res = float(np.sum((ly - (slope * t + icpt)) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    rate = -float(slope)
    return (0.0 if abs(rate) < 1e-14 else rate), r2
