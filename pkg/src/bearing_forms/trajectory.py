"""Desired formation trajectories generated by a time-varying similarity transform.

Every agent follows ``p_i*(t) = s(t) R(t)^T p_i*(0) + c(t)`` with analytic first and
second derivatives, so the PE quadrature and the controller feedforward never rely on
numerical differentiation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import OutsideHorizon, UnsupportedDimension


# --- scale -----------------------------------------------------------------

@dataclass(frozen=True)
class ConstScale:
    value: float = 1.0

    def __call__(self, t: float) -> tuple[float, float, float]:
        return self.value, 0.0, 0.0

    def lower_bound(self) -> float:
        return self.value


@dataclass(frozen=True)
class SinScale:
    """``s(t) = offset + amp * sin(freq * t)`` with ``freq`` in rad/s."""

    amp: float
    freq: float
    offset: float

    def __call__(self, t: float) -> tuple[float, float, float]:
        w = self.freq
        s, c = math.sin(w * t), math.cos(w * t)
        return self.offset + self.amp * s, self.amp * w * c, -self.amp * w * w * s

    def lower_bound(self) -> float:
        return self.offset - abs(self.amp)


@dataclass(frozen=True)
class RelativeScale:
    """``s(t) / s(0)``: lets the base configuration be the desired one at ``t = 0``."""

    inner: ConstScale | SinScale

    def __call__(self, t: float) -> tuple[float, float, float]:
        s0 = self.inner(0.0)[0]
        s, ds, dds = self.inner(t)
        return s / s0, ds / s0, dds / s0

    def lower_bound(self) -> float:
        return self.inner.lower_bound() / self.inner(0.0)[0]


# --- rotation --------------------------------------------------------------

def _skew(a: NDArray[np.float64]) -> NDArray[np.float64]:
    return np.array([[0.0, -a[2], a[1]], [a[2], 0.0, -a[0]], [-a[1], a[0], 0.0]])


@dataclass(frozen=True)
class IdentityRotation:
    d: int

    def __call__(self, t: float):
        z = np.zeros((self.d, self.d))
        return np.eye(self.d), z, z


@dataclass(frozen=True)
class PlanarRotation:
    """Counter-clockwise rotation by ``rate * t`` in the plane."""

    rate: float
    d: int = field(default=2, init=False)

    def __call__(self, t: float):
        w = self.rate
        c, s = math.cos(w * t), math.sin(w * t)
        R = np.array([[c, -s], [s, c]])
        K = np.array([[0.0, -w], [w, 0.0]])
        return R, K @ R, K @ K @ R


@dataclass(frozen=True)
class AxisRotation:
    """Rotation about a fixed unit axis in R^3 by angle ``rate * t``."""

    axis: tuple[float, float, float]
    rate: float
    d: int = field(default=3, init=False)

    def __post_init__(self):
        a = np.asarray(self.axis, dtype=float)
        object.__setattr__(self, "axis", tuple(float(x) for x in a / np.linalg.norm(a)))

    def __call__(self, t: float):
        K = _skew(np.asarray(self.axis))
        th = self.rate * t
        R = np.eye(3) + math.sin(th) * K + (1.0 - math.cos(th)) * (K @ K)
        W = self.rate * K
        return R, W @ R, W @ W @ R


@dataclass(frozen=True)
class CallableRotation:
    """Rotation supplied as explicit callables ``R(t)``, ``dR/dt``, ``d2R/dt2`` (any ``d``)."""

    R: Callable[[float], NDArray[np.float64]]
    dR: Callable[[float], NDArray[np.float64]]
    ddR: Callable[[float], NDArray[np.float64]]
    d: int

    def __call__(self, t: float):
        return np.asarray(self.R(t)), np.asarray(self.dR(t)), np.asarray(self.ddR(t))


def rotation_about_axis(rate: float, axis: ArrayLike | None = None, d: int | None = None):
    """Constant-rate rotation with ``R(0) = I``.

    For ``d == 2`` the axis is ignored; for ``d == 3`` it is required.
    """
    if d is None:
        d = 2 if axis is None else len(np.ravel(axis))
    if d == 2:
        return PlanarRotation(rate)
    if d == 3:
        if axis is None:
            raise ValueError("an axis is required for rotations in R^3")
        return AxisRotation(tuple(np.ravel(axis)), rate)
    raise UnsupportedDimension(f"no built-in rotation for d={d}; pass a CallableRotation")


# --- translation -----------------------------------------------------------

@dataclass(frozen=True)
class PolyTranslation:
    """``c(t) = sum_k coeffs[k] * t**k``; ``coeffs`` has shape ``(K, d)``."""

    coeffs: NDArray[np.float64]

    @classmethod
    def constant_velocity(cls, velocity: ArrayLike, origin: ArrayLike | None = None) -> "PolyTranslation":
        v = np.asarray(velocity, dtype=float)
        c0 = np.zeros_like(v) if origin is None else np.asarray(origin, dtype=float)
        return cls(np.vstack([c0, v]))

    @classmethod
    def zero(cls, d: int) -> "PolyTranslation":
        return cls(np.zeros((1, d)))

    def __call__(self, t: float):
        C = np.asarray(self.coeffs, dtype=float)
        k = np.arange(C.shape[0])
        c = (t ** k) @ C
        dk = k[1:] * t ** (k[1:] - 1)
        dc = dk @ C[1:] if C.shape[0] > 1 else np.zeros(C.shape[1])
        if C.shape[0] > 2:
            ddk = k[2:] * (k[2:] - 1) * t ** (k[2:] - 2)
            ddc = ddk @ C[2:]
        else:
            ddc = np.zeros(C.shape[1])
        return c, dc, ddc


# --- trajectory ------------------------------------------------------------

@dataclass(frozen=True)
class DesiredTrajectory:
    """Similarity-transform family of desired configurations.

    ``period`` (if set) is the period of the desired *bearings*, which only the
    rotation affects; scale and translation never change a bearing.
    """

    base: NDArray[np.float64]
    scale: ConstScale | SinScale | RelativeScale
    rotation: IdentityRotation | PlanarRotation | AxisRotation | CallableRotation
    translation: PolyTranslation
    period: float | None = None
    t_max: float | None = None

    def __post_init__(self):
        base = np.asarray(self.base, dtype=float)
        object.__setattr__(self, "base", base)
        if base.ndim != 2:
            raise ValueError("base must be an (n, d) array of agent positions")
        if self.rotation.d != base.shape[1]:
            raise ValueError(f"rotation acts on R^{self.rotation.d}, base lives in R^{base.shape[1]}")
        if self.scale.lower_bound() <= 0:
            raise ValueError("scale must stay positive")

    @property
    def n(self) -> int:
        return self.base.shape[0]

    @property
    def d(self) -> int:
        return self.base.shape[1]

    def _check(self, t: float) -> None:
        if t < 0 or (self.t_max is not None and t > self.t_max):
            raise OutsideHorizon(f"t={t} outside [0, {self.t_max}]")

    def _parts(self, t: float):
        self._check(t)
        return self.scale(t), self.rotation(t), self.translation(t)

    # base @ R gives the rows (R^T p_i)^T
    def positions(self, t: float) -> NDArray[np.float64]:
        (s, _, _), (R, _, _), (c, _, _) = self._parts(t)
        return (s * (self.base @ R) + c).ravel()

    def velocities(self, t: float) -> NDArray[np.float64]:
        (s, ds, _), (R, dR, _), (_, dc, _) = self._parts(t)
        return (ds * (self.base @ R) + s * (self.base @ dR) + dc).ravel()

    def accelerations(self, t: float) -> NDArray[np.float64]:
        (s, ds, dds), (R, dR, ddR), (_, _, ddc) = self._parts(t)
        B = self.base
        return (dds * (B @ R) + 2.0 * ds * (B @ dR) + s * (B @ ddR) + ddc).ravel()

    def state(self, t: float) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
        """Positions, velocities and accelerations at ``t`` in one pass."""
        (s, ds, dds), (R, dR, ddR), (c, dc, ddc) = self._parts(t)
        B = self.base
        BR, BdR = B @ R, B @ dR
        p = s * BR + c
        v = ds * BR + s * BdR + dc
        a = dds * BR + 2.0 * ds * BdR + s * (B @ ddR) + ddc
        return p.ravel(), v.ravel(), a.ravel()

    def rotation_matrix(self, t: float) -> NDArray[np.float64]:
        return self.rotation(t)[0]


def eval_positions(traj: DesiredTrajectory, t: float) -> NDArray[np.float64]:
    return traj.positions(t)


def eval_velocities(traj: DesiredTrajectory, t: float) -> NDArray[np.float64]:
    return traj.velocities(t)


def eval_accelerations(traj: DesiredTrajectory, t: float) -> NDArray[np.float64]:
    return traj.accelerations(t)


def static_trajectory(base: ArrayLike) -> DesiredTrajectory:
    base = np.asarray(base, dtype=float)
    d = base.shape[1]
    return DesiredTrajectory(base, ConstScale(1.0), IdentityRotation(d), PolyTranslation.zero(d))


@dataclass(frozen=True)
class FunctionTrajectory:
    """Arbitrary desired motion given by a callable returning the ``(n, d)`` positions.

    Only what the PE analysis needs (positions, optional period) is required;
    derivatives are optional and, when absent, the trajectory cannot drive a controller.
    """

    n: int
    d: int
    pos: Callable[[float], ArrayLike]
    vel: Callable[[float], ArrayLike] | None = None
    acc: Callable[[float], ArrayLike] | None = None
    period: float | None = None

    def positions(self, t: float) -> NDArray[np.float64]:
        return np.asarray(self.pos(t), dtype=float).reshape(self.n * self.d)

    def velocities(self, t: float) -> NDArray[np.float64]:
        if self.vel is None:
            raise NotImplementedError("trajectory has no velocity callable")
        return np.asarray(self.vel(t), dtype=float).reshape(self.n * self.d)

    def accelerations(self, t: float) -> NDArray[np.float64]:
        if self.acc is None:
            raise NotImplementedError("trajectory has no acceleration callable")
        return np.asarray(self.acc(t), dtype=float).reshape(self.n * self.d)

    def state(self, t: float):
        return self.positions(t), self.velocities(t), self.accelerations(t)


def append_agent(traj, agent_pos: Callable[[float], ArrayLike], period: float | None = None) -> FunctionTrajectory:
    """Extend ``traj`` with one extra agent whose position is ``agent_pos(t)``."""
    n, d = traj.n, traj.d

    def pos(t: float) -> NDArray[np.float64]:
        return np.vstack([traj.positions(t).reshape(n, d), np.asarray(agent_pos(t), dtype=float).reshape(1, d)])

    return FunctionTrajectory(n + 1, d, pos, period=period if period is not None else traj.period)
