"""Fixed-step RK4 simulation of the observer and the two closed-loop formations."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .bearing import EPS_COINCIDENT
from .control import apply_bearing_laplacian, formation_feedback
from .errors import BearingLoss
from .graph import FormationGraph

log = logging.getLogger(__name__)

DT = 1e-3


def rk4_step(f: Callable[[float, NDArray], NDArray], t: float, x: NDArray, dt: float) -> NDArray:
    k1 = f(t, x)
    k2 = f(t + 0.5 * dt, x + 0.5 * dt * k1)
    k3 = f(t + 0.5 * dt, x + 0.5 * dt * k2)
    k4 = f(t + dt, x + dt * k3)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@dataclass
class SimTrace:
    """Recorded run. Arrays are indexed by record, rows stacked agent-major (``p1x, p1y, ...``)."""

    kind: str
    n: int
    d: int
    t: NDArray[np.float64]
    p: NDArray[np.float64]
    p_star: NDArray[np.float64]
    v: NDArray[np.float64]
    v_star: NDArray[np.float64]
    control: NDArray[np.float64]
    min_sep: NDArray[np.float64]
    p_hat: NDArray[np.float64] | None = None
    aborted: BearingLoss | None = field(default=None, repr=False)

    @property
    def p_err(self) -> NDArray[np.float64]:
        """``p~ = p - p*`` (for the observer: ``p_hat - p``)."""
        if self.p_hat is not None:
            return self.p_hat - self.p
        return self.p - self.p_star

    @property
    def v_err(self) -> NDArray[np.float64]:
        return self.v - self.v_star

    def _centroid(self, X: NDArray[np.float64]) -> NDArray[np.float64]:
        return X.reshape(len(X), self.n, self.d).mean(axis=1)

    @property
    def q0(self) -> NDArray[np.float64]:
        """Relative centroid (``xi_0`` for the observer)."""
        return self._centroid(self.p_err)

    @property
    def q0_dot(self) -> NDArray[np.float64]:
        return self._centroid(self.v_err)

    @property
    def delta(self) -> NDArray[np.float64]:
        """``p~ - U q0`` (``zeta`` for the observer)."""
        return self.p_err - np.tile(self.q0, self.n)

    @property
    def v_delta(self) -> NDArray[np.float64]:
        return self.v_err - np.tile(self.q0_dot, self.n)

    @property
    def err_p(self) -> NDArray[np.float64]:
        return np.linalg.norm(self.p_err, axis=1)

    @property
    def err_delta(self) -> NDArray[np.float64]:
        return np.linalg.norm(self.delta, axis=1)

    @property
    def err_v(self) -> NDArray[np.float64]:
        return np.linalg.norm(self.v_err, axis=1)

    def at(self, time: float) -> int:
        """Index of the record closest to ``time``."""
        return int(np.argmin(np.abs(self.t - time)))

    def lyapunov_single(self) -> NDArray[np.float64]:
        return 0.5 * self.err_delta ** 2

    def lyapunov_double(self, k_d: float) -> NDArray[np.float64]:
        """``x~^T P x~`` with ``P = 1/2 [[k_d I, I], [I, I]]``."""
        a, b = self.delta, self.v_delta
        return 0.5 * (k_d * np.sum(a * a, 1) + 2.0 * np.sum(a * b, 1) + np.sum(b * b, 1))


class _Recorder:
    def __init__(self, kind: str, n: int, d: int, observer: bool = False):
        self.kind, self.n, self.d, self.observer = kind, n, d, observer
        self.rows: dict[str, list] = {k: [] for k in
                                      ("t", "p", "p_star", "v", "v_star", "control", "min_sep", "p_hat")}

    def add(self, **kw) -> None:
        for k, v in kw.items():
            self.rows[k].append(np.array(v, dtype=float, copy=True))

    def build(self, aborted: BearingLoss | None = None) -> SimTrace:
        r = {k: np.array(v) for k, v in self.rows.items()}
        return SimTrace(kind=self.kind, n=self.n, d=self.d, t=r["t"], p=r["p"], p_star=r["p_star"], v=r["v"],
                        v_star=r["v_star"], control=r["control"], min_sep=r["min_sep"],
                        p_hat=r["p_hat"] if self.observer else None, aborted=aborted)


class _StateCache:
    """Memoize the desired state at the most recent few stage times (RK4 reuses ``t + dt/2``)."""

    def __init__(self, traj):
        self.traj = traj
        self.keys: list[float] = []
        self.vals: list = []

    def __call__(self, t: float):
        for k, v in zip(self.keys, self.vals):
            if k == t:
                return v
        v = self.traj.state(t)
        self.keys = [t] + self.keys[:2]
        self.vals = [v] + self.vals[:2]
        return v


def _n_steps(horizon: float, dt: float) -> int:
    n = int(round(horizon / dt))
    if n <= 0 or abs(n * dt - horizon) > 1e-9 * max(1.0, horizon):
        raise ValueError(f"horizon {horizon} is not a whole number of steps of {dt}")
    return n


def simulate_single(g: FormationGraph, traj, p0: ArrayLike, k_p: float, dt: float = DT,
                    horizon: float = 10.0, record_every: int = 1, eps: float = EPS_COINCIDENT,
                    raise_on_loss: bool = True) -> SimTrace:
    """Integrate ``p_i' = v_i`` under the single-integrator bearing law.

    Raises:
        BearingLoss: an edge collapsed mid-run; ``err.trace`` holds the partial record.
    """
    n, d = g.n, g.d
    desired = _StateCache(traj)
    sep = [np.inf]

    def rhs(t: float, p: NDArray) -> NDArray:
        ps, vs, _ = desired(t)
        fb, sep[0] = formation_feedback(g, p, ps, t, eps)
        return k_p * fb + vs

    rec = _Recorder("single", n, d)
    p = np.asarray(p0, dtype=float).ravel().copy()
    steps = _n_steps(horizon, dt)
    for k in range(steps + 1):
        t = k * dt
        try:
            cmd = rhs(t, p)
        except BearingLoss as err:
            err.trace = rec.build(err)
            if raise_on_loss:
                raise
            return err.trace
        if k % record_every == 0 or k == steps:
            ps, vs, _ = desired(t)
            rec.add(t=t, p=p, p_star=ps, v=cmd, v_star=vs, control=cmd, min_sep=sep[0])
        if k == steps:
            break
        try:
            p = rk4_step(rhs, t, p, dt)
        except BearingLoss as err:
            err.trace = rec.build(err)
            if raise_on_loss:
                raise
            return err.trace
    return rec.build()


def simulate_double(g: FormationGraph, traj, p0: ArrayLike, v0: ArrayLike, k_p: float, k_d: float,
                    dt: float = DT, horizon: float = 10.0, record_every: int = 1,
                    eps: float = EPS_COINCIDENT, raise_on_loss: bool = True) -> SimTrace:
    """Integrate ``p_i' = v_i, v_i' = u_i`` under the double-integrator bearing law."""
    n, d = g.n, g.d
    dn = n * d
    desired = _StateCache(traj)
    sep = [np.inf]

    def accel(t: float, p: NDArray, v: NDArray) -> NDArray:
        ps, vs, us = desired(t)
        fb, sep[0] = formation_feedback(g, p, ps, t, eps)
        return k_p * fb - k_d * (v - vs) + us

    def rhs(t: float, x: NDArray) -> NDArray:
        return np.concatenate([x[dn:], accel(t, x[:dn], x[dn:])])

    rec = _Recorder("double", n, d)
    x = np.concatenate([np.asarray(p0, dtype=float).ravel(), np.asarray(v0, dtype=float).ravel()])
    steps = _n_steps(horizon, dt)
    for k in range(steps + 1):
        t = k * dt
        try:
            u = accel(t, x[:dn], x[dn:])
            if k % record_every == 0 or k == steps:
                ps, vs, _ = desired(t)
                rec.add(t=t, p=x[:dn], p_star=ps, v=x[dn:], v_star=vs, control=u, min_sep=sep[0])
            if k == steps:
                break
            x = rk4_step(rhs, t, x, dt)
        except BearingLoss as err:
            err.trace = rec.build(err)
            if raise_on_loss:
                raise
            return err.trace
    return rec.build()


def observer_rhs(g: FormationGraph, p: ArrayLike, v: ArrayLike, p_hat: ArrayLike, t: float = 0.0,
                 eps: float = EPS_COINCIDENT) -> NDArray[np.float64]:
    """``v - L_B(p) p_hat`` (unit observer gain)."""
    lb, _ = apply_bearing_laplacian(g, np.asarray(p, dtype=float).ravel(),
                                    np.asarray(p_hat, dtype=float).ravel(), t, eps)
    return np.asarray(v, dtype=float).ravel() - lb


def simulate_observer(g: FormationGraph, motion, p_hat0: ArrayLike, dt: float = DT, horizon: float = 10.0,
                      record_every: int = 1, eps: float = EPS_COINCIDENT) -> SimTrace:
    """Run the position observer against ``motion`` (anything with ``state(t)``).

    The trace's ``p`` holds the true positions, ``p_hat`` the estimate; ``delta`` is
    then ``zeta`` and ``q0`` is the (constant) centroid offset ``xi_0``.
    """
    n, d = g.n, g.d
    actual = _StateCache(motion)
    sep = [np.inf]

    def rhs(t: float, ph: NDArray) -> NDArray:
        p, v, _ = actual(t)
        lb, sep[0] = apply_bearing_laplacian(g, p, ph, t, eps)
        return v - lb

    rec = _Recorder("observer", n, d, observer=True)
    ph = np.asarray(p_hat0, dtype=float).ravel().copy()
    steps = _n_steps(horizon, dt)
    for k in range(steps + 1):
        t = k * dt
        if k % record_every == 0 or k == steps:
            p, v, _ = actual(t)
            dph = rhs(t, ph)
            rec.add(t=t, p=p, p_star=p, v=v, v_star=v, control=dph, min_sep=sep[0], p_hat=ph)
        if k == steps:
            break
        ph = rk4_step(rhs, t, ph, dt)
    return rec.build()

