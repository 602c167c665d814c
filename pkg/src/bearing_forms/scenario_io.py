"""TOML scenario files: parsing, validation and construction of runnable objects.

Grammar (all sections except ``[integrator]``, ``[pe]`` and ``[observer]`` required)::

    name = "..."                      # optional
    dynamics = "single" | "double" | "observer"

    [graph]        n, d, edges = [[i, j], ...]   (1-indexed)
    [trajectory]   type = "similarity", base = [[...], ...], period (optional),
                   base_is_initial = false (true: the scale is divided by s(0), so base = p*(0)),
                   scale = {kind = "sin", amp, freq, offset} | {kind = "const", value},
                   rotation = {rate} (d = 2) | {axis, rate} (d = 3) | omitted (identity),
                   translation = {velocity} | {coeffs = [[c0...], [c1...], ...]} | omitted
    [gains]        k_p, k_d (required for "double")
    [initial]      positions = [[...], ...], velocities = [[...], ...]
                   or perturb = {seed, fraction}  (uniform in the basin ball scaled by fraction)
    [integrator]   dt = 1e-3, horizon = 10.0, record_every = 10
    [pe]           T (default: period, else 1.0), mu_min = 1e-3, step, horizon
    [observer]     seed = 0, offset_norm = 1.0
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import tomli
import tomli_w
from numpy.typing import NDArray

from .errors import BearingFormsError, ScenarioError
from .graph import FormationGraph, build_graph
from .stability import GainSet, basin_radius_double, basin_radius_single
from .trajectory import (ConstScale, DesiredTrajectory, IdentityRotation, PolyTranslation, RelativeScale, SinScale,
                         rotation_about_axis)

DYNAMICS = ("single", "double", "observer")


@dataclass(frozen=True)
class Scenario:
    name: str
    dynamics: str
    graph: FormationGraph
    trajectory: DesiredTrajectory
    gains: GainSet
    initial: dict[str, Any]
    dt: float
    horizon: float
    record_every: int
    pe: dict[str, Any]
    observer: dict[str, Any]
    raw: dict[str, Any] = field(repr=False)
    text: str = field(repr=False, default="")

    @property
    def digest(self) -> str:
        return scenario_hash(self.text or dump_scenario(self.raw))


def scenario_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def _req(tbl: dict, key: str, where: str):
    if key not in tbl:
        raise ScenarioError(f"[{where}] missing required key '{key}'")
    return tbl[key]


def _num(x, where: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
        raise ScenarioError(f"{where}: expected a finite number, got {x!r}")
    return float(x)


def _matrix(x, rows: int | None, cols: int, where: str) -> NDArray[np.float64]:
    try:
        A = np.array([[_num(v, where) for v in row] for row in x], dtype=float)
    except TypeError as exc:
        raise ScenarioError(f"{where}: expected a list of rows") from exc
    if A.ndim != 2 or A.shape[1] != cols or (rows is not None and A.shape[0] != rows):
        raise ScenarioError(f"{where}: expected shape ({rows if rows is not None else 'k'}, {cols}), "
                            f"got {A.shape}")
    return A


def _vector(x, d: int, where: str) -> NDArray[np.float64]:
    return _matrix([x], 1, d, where)[0]


def _scale(spec: dict | None):
    if spec is None:
        return ConstScale(1.0)
    kind = _req(spec, "kind", "trajectory.scale")
    if kind == "const":
        return ConstScale(_num(_req(spec, "value", "trajectory.scale"), "trajectory.scale.value"))
    if kind == "sin":
        return SinScale(*(_num(_req(spec, k, "trajectory.scale"), f"trajectory.scale.{k}")
                          for k in ("amp", "freq", "offset")))
    raise ScenarioError(f"trajectory.scale.kind: unknown kind {kind!r} (use 'sin' or 'const')")


def _rotation(spec: dict | None, d: int):
    if spec is None:
        return IdentityRotation(d)
    rate = _num(_req(spec, "rate", "trajectory.rotation"), "trajectory.rotation.rate")
    axis = spec.get("axis")
    if d == 3 and axis is None:
        raise ScenarioError("trajectory.rotation: 'axis' is required in R^3")
    if axis is not None:
        axis = _vector(axis, 3, "trajectory.rotation.axis")
        if np.linalg.norm(axis) == 0:
            raise ScenarioError("trajectory.rotation.axis must be nonzero")
    try:
        return rotation_about_axis(rate, axis, d)
    except BearingFormsError as exc:
        raise ScenarioError(f"trajectory.rotation: {exc}") from exc


def _translation(spec: dict | None, d: int) -> PolyTranslation:
    if spec is None:
        return PolyTranslation.zero(d)
    if "velocity" in spec:
        origin = spec.get("origin")
        return PolyTranslation.constant_velocity(_vector(spec["velocity"], d, "trajectory.translation.velocity"),
                                                 None if origin is None else
                                                 _vector(origin, d, "trajectory.translation.origin"))
    if "coeffs" in spec:
        return PolyTranslation(_matrix(spec["coeffs"], None, d, "trajectory.translation.coeffs"))
    raise ScenarioError("trajectory.translation: give 'velocity' or 'coeffs'")


def build_trajectory(tbl: dict, n: int, d: int) -> DesiredTrajectory:
    kind = tbl.get("type", "similarity")
    if kind != "similarity":
        raise ScenarioError(f"trajectory.type: only 'similarity' is supported, got {kind!r}")
    base = _matrix(_req(tbl, "base", "trajectory"), n, d, "trajectory.base")
    period = tbl.get("period")
    if period is not None:
        period = _num(period, "trajectory.period")
        if period <= 0:
            raise ScenarioError("trajectory.period must be positive")
    scale = _scale(tbl.get("scale"))
    anchored = tbl.get("base_is_initial", False)
    if not isinstance(anchored, bool):
        raise ScenarioError("trajectory.base_is_initial must be true or false")
    if anchored:
        scale = RelativeScale(scale)
    try:
        return DesiredTrajectory(base, scale, _rotation(tbl.get("rotation"), d),
                                 _translation(tbl.get("translation"), d), period=period)
    except (ValueError, TypeError) as exc:
        raise ScenarioError(f"trajectory: {exc}") from exc


def parse_scenario(text: str, source: str = "<string>") -> Scenario:
    """Parse and validate scenario text.

    Raises:
        ScenarioError: syntax errors (with line and column) or schema violations.
    """
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ScenarioError(f"{source}: {exc}") from exc
    try:
        return from_dict(raw, text)
    except ScenarioError as exc:
        raise ScenarioError(f"{source}: {exc}") from exc


def from_dict(raw: dict[str, Any], text: str = "") -> Scenario:
    dyn = raw.get("dynamics", "single")
    if dyn not in DYNAMICS:
        raise ScenarioError(f"dynamics must be one of {DYNAMICS}, got {dyn!r}")
    gt = _req(raw, "graph", "top level")
    n = _req(gt, "n", "graph")
    d = _req(gt, "d", "graph")
    if not (isinstance(n, int) and isinstance(d, int)):
        raise ScenarioError("graph.n and graph.d must be integers")
    edges = _req(gt, "edges", "graph")
    try:
        g = build_graph(n, [tuple(e) for e in edges], d)
    except (BearingFormsError, TypeError, ValueError) as exc:
        raise ScenarioError(f"graph: {exc}") from exc
    traj = build_trajectory(_req(raw, "trajectory", "top level"), n, d)

    gn = raw.get("gains", {})
    k_d = gn.get("k_d")
    if dyn == "double" and k_d is None:
        raise ScenarioError("[gains] k_d is required for double-integrator dynamics")
    try:
        gains = GainSet(_num(gn.get("k_p", 1.0), "gains.k_p"), None if k_d is None else _num(k_d, "gains.k_d"))
    except BearingFormsError as exc:
        raise ScenarioError(f"gains: {exc}") from exc

    it = raw.get("initial", {})
    init: dict[str, Any] = {}
    if "perturb" in it:
        pt = it["perturb"]
        frac = _num(_req(pt, "fraction", "initial.perturb"), "initial.perturb.fraction")
        if not 0 < frac <= 1:
            raise ScenarioError(f"initial.perturb.fraction must lie in (0, 1], got {frac}")
        init["perturb"] = {"seed": int(pt.get("seed", 0)), "fraction": frac}
    else:
        if dyn != "observer":
            init["positions"] = _matrix(_req(it, "positions", "initial"), n, d, "initial.positions")
        elif "positions" in it:
            init["positions"] = _matrix(it["positions"], n, d, "initial.positions")
        if dyn == "double":
            init["velocities"] = _matrix(_req(it, "velocities", "initial"), n, d, "initial.velocities")

    ig = raw.get("integrator", {})
    dt = _num(ig.get("dt", 1e-3), "integrator.dt")
    horizon = _num(ig.get("horizon", 10.0), "integrator.horizon")
    rec = ig.get("record_every", 10)
    if dt <= 0 or horizon <= 0 or not isinstance(rec, int) or rec < 1:
        raise ScenarioError("integrator: dt and horizon must be positive, record_every a positive integer")

    pe = dict(raw.get("pe", {}))
    pe.setdefault("T", traj.period if traj.period else 1.0)
    pe.setdefault("mu_min", 1e-3)
    for k in ("T", "mu_min", "step", "horizon"):
        if k in pe:
            pe[k] = _num(pe[k], f"pe.{k}")
    obs = {"seed": 0, "offset_norm": 1.0, **raw.get("observer", {})}
    return Scenario(name=str(raw.get("name", "scenario")), dynamics=dyn, graph=g, trajectory=traj, gains=gains,
                    initial=init, dt=dt, horizon=horizon, record_every=rec, pe=pe, observer=obs, raw=raw, text=text)


def load_scenario(path: str | Path) -> Scenario:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"cannot read {p}: {exc}") from exc
    return parse_scenario(text, str(p))


def dump_scenario(raw: dict[str, Any]) -> str:
    return tomli_w.dumps(raw)


def _ball(rng: np.random.Generator, dim: int, radius: float) -> NDArray[np.float64]:
    x = rng.standard_normal(dim)
    x /= np.linalg.norm(x)
    return radius * rng.random() ** (1.0 / dim) * x


def initial_state(scn: Scenario, seed: int | None = None) -> tuple[NDArray[np.float64], NDArray[np.float64] | None]:
    """Stacked ``p(0)`` and (double integrator) ``v(0)``.

    Perturbed starts sample uniformly from the ball of radius ``fraction * basin``
    around the desired state; ``seed`` overrides the file's seed.
    """
    g, traj = scn.graph, scn.trajectory
    if "perturb" not in scn.initial:
        p0 = scn.initial["positions"].ravel()
        v0 = scn.initial["velocities"].ravel() if "velocities" in scn.initial else None
        return p0, v0
    pt = scn.initial["perturb"]
    rng = np.random.default_rng(pt["seed"] if seed is None else seed)
    ps, vs, _ = traj.state(0.0)
    dn = g.n * g.d
    if scn.dynamics == "double":
        r = pt["fraction"] * basin_radius_double(g, traj, scn.gains.k_d, horizon=scn.horizon).radius
        x = _ball(rng, 2 * dn, r)
        return ps + x[:dn], vs + x[dn:]
    r = pt["fraction"] * basin_radius_single(g, traj, horizon=scn.horizon)
    return ps + _ball(rng, dn, r), None


def observer_initial(scn: Scenario, seed: int | None = None) -> NDArray[np.float64]:
    """``p_hat(0) = p(0) + zeta0`` with a random ``zeta0`` orthogonal to ``U``, scaled to ``offset_norm``."""
    g = scn.graph
    rng = np.random.default_rng(scn.observer["seed"] if seed is None else seed)
    z = rng.standard_normal((g.n, g.d))
    z -= z.mean(axis=0)
    z *= float(scn.observer["offset_norm"]) / np.linalg.norm(z)
    return scn.trajectory.positions(0.0) + z.ravel()
