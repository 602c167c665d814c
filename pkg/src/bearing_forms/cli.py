"""Command-line front end: ``bearing-forms {analyze|simulate|observe|scenarios|sweep}``.

Exit codes: 0 success or BPE, 2 analysis negative, 3 gain violation, 4 bearing loss,
64 usage or parse error.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import itertools
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .errors import (BearingFormsError, BearingLoss, DisconnectedGraph, GainConditionViolated, InvalidGain,
                     RankHypothesisFails, ScenarioError)
from .graph import has_spanning_tree, is_acyclic, min_rigid_edge_count
from .pe import (certify_bearing_laplacian_pe, edge_pe_table, min_pe_bearing_lower_bound,
                 rank_history)
from .plots import write_plots
from .scenario_io import Scenario, from_dict, initial_state, load_scenario, observer_initial
from .scenarios import BUILTINS, builtin, builtin_text
from .sim import SimTrace, simulate_double, simulate_observer, simulate_single
from .stability import basin_radius_double, basin_radius_single, fit_exponential_rate, validate_gains

log = logging.getLogger("bearing_forms")

EXIT_OK, EXIT_NEGATIVE, EXIT_GAIN, EXIT_LOSS, EXIT_USAGE = 0, 2, 3, 4, 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit 2, which means "analysis negative" here
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _f(x: float) -> str:
    return repr(float(x))


def trace_csv(trace: SimTrace) -> str:
    """CSV text with a fixed column order; floats use ``repr`` for byte-stable output."""
    n, d = trace.n, trace.d
    ax = "xyz" if d <= 3 else [str(k) for k in range(d)]
    pos = trace.p_hat if trace.p_hat is not None else trace.p
    header = ["t"] + [f"p{i + 1}{ax[k]}" for i in range(n) for k in range(d)]
    cols = [pos]
    if trace.kind == "double":
        header += [f"v{i + 1}{ax[k]}" for i in range(n) for k in range(d)]
        cols.append(trace.v)
    third = "err_v"
    if trace.kind == "observer":
        third = "xi0_drift"
        ev = np.linalg.norm(trace.q0 - trace.q0[0], axis=1)
    else:
        ev = trace.err_v
    header += ["err_p", "err_delta", third, "min_sep"]
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    data = np.column_stack([trace.t, *cols, trace.err_p, trace.err_delta, ev, trace.min_sep])
    for row in data:
        buf.write(",".join(_f(x) for x in row) + "\n")
    return buf.getvalue()


def _load(path: str) -> Scenario:
    if path.startswith("builtin:"):
        return builtin(path.split(":", 1)[1])
    return load_scenario(path)


def _override(scn: Scenario, dt: float | None = None, horizon: float | None = None) -> Scenario:
    if dt is None and horizon is None:
        return scn
    raw = copy.deepcopy(scn.raw)
    ig = raw.setdefault("integrator", {})
    if dt is not None:
        ig["dt"] = dt
    if horizon is not None:
        ig["horizon"] = horizon
    return from_dict(raw)


def _write_json(path: Path, obj: dict) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# --- analyze ---------------------------------------------------------------

def cmd_analyze(args) -> int:
    scn = _load(args.scenario)
    g, traj, pe = scn.graph, scn.trajectory, scn.pe
    T, mu_min = pe["T"], pe["mu_min"]
    kw = {k: pe[k] for k in ("step", "horizon") if k in pe}
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    f = min_rigid_edge_count(g.n, g.d)
    rows: list[tuple[str, Any]] = [("scenario", scn.name), ("hash", scn.digest), ("n", g.n), ("d", g.d),
                                   ("m", g.m), ("f(n,d)", f)]
    connected = has_spanning_tree(g)
    rows += [("connected", connected), ("acyclic", is_acyclic(g))]
    print(f"scenario {scn.name}  n={g.n} d={g.d} m={g.m}  f(n,d)={f}")
    print(f"connected: {connected}   acyclic: {is_acyclic(g)}")
    if not connected:
        print("graph has no spanning tree: not BPE")
        _write_report(out, rows + [("bpe", False)], [])
        return EXIT_NEGATIVE
    bound = min_pe_bearing_lower_bound(g.m, g.n, g.d)
    rows.append(("min_pe_bearings_bound", bound))
    print(f"lower bound on PE bearings needed: {bound}")

    hz = traj.period or 3.0 * T
    times = np.linspace(0.0, hz, 61)
    ranks = rank_history(g, traj, times)
    target = g.d * g.n - g.d - 1
    print(f"rank L_B over [0, {hz:g}]: min {ranks.min()}  max {ranks.max()}  (dn-d-1 = {target})")
    rows += [("rank_min", int(ranks.min())), ("rank_max", int(ranks.max())), ("rank_target", target)]

    cert = certify_bearing_laplacian_pe(g, traj, T, mu_min, **kw)
    print(cert.summary())
    rows += [("T", cert.T), ("mu", cert.mu), ("mu_min", cert.mu_min), ("label", cert.label)]

    table = edge_pe_table(g, traj, T, mu_min, **kw)
    print("edge      mu_edge     PE")
    edge_rows = []
    for e, c in table.per_edge:
        print(f"{e[0]:>3}-{e[1]:<3} {c.mu:11.3e}  {c.is_pe}")
        edge_rows.append((f"{e[0]}-{e[1]}", c.mu, c.is_pe))
    if is_acyclic(g):
        tree_ok = not table.offending_edges
        print(f"tree check (every bearing PE): {tree_ok}")
        rows.append(("tree_check", tree_ok))
    elif ranks.min() == target:
        lem = bool(table.pe_edges)
        print(f"full-rank check (some bearing PE): {lem}")
        rows.append(("full_rank_check", lem))
    bpe = cert.is_pe
    rows.append(("bpe", bpe))
    print(f"BPE: {bpe}")
    _write_report(out, rows, edge_rows)
    return EXIT_OK if bpe else EXIT_NEGATIVE


def _write_report(out: Path, rows, edge_rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["key", "value"])
    for k, v in rows:
        w.writerow([k, _f(v) if isinstance(v, float) else v])
    if edge_rows:
        w.writerow([])
        w.writerow(["edge", "mu", "pe"])
        for e, mu, ok in edge_rows:
            w.writerow([e, _f(mu), ok])
    (out / "analysis.csv").write_text(buf.getvalue(), encoding="utf-8")


# --- simulate --------------------------------------------------------------

def _basin(scn: Scenario, p0, v0) -> dict[str, float]:
    g, traj = scn.graph, scn.trajectory
    ps, vs, _ = traj.state(0.0)
    if scn.dynamics == "double":
        b = basin_radius_double(g, traj, scn.gains.k_d, horizon=scn.horizon)
        x0 = float(np.linalg.norm(np.concatenate([p0 - ps, v0 - vs])))
        return {"basin_radius": b.radius, "initial_error": x0, "b": b.b}
    r = basin_radius_single(g, traj, horizon=scn.horizon)
    return {"basin_radius": r, "initial_error": float(np.linalg.norm(p0 - ps))}


def run_scenario(scn: Scenario, seed: int | None = None, force: bool = False) -> tuple[SimTrace, dict[str, Any]]:
    """Run a single- or double-integrator scenario; raises BearingLoss on collapse."""
    g, traj, gains = scn.graph, scn.trajectory, scn.gains
    p0, v0 = initial_state(scn, seed)
    info: dict[str, Any] = {"scenario": scn.name, "hash": scn.digest, "dynamics": scn.dynamics,
                            "dt": scn.dt, "horizon": scn.horizon}
    if scn.dynamics == "double":
        chk = validate_gains(g, gains.k_p, gains.k_d)
        info.update(gain_ok=chk.ok, gain_margin=chk.margin, required_kd=chk.required_kd)
        if not chk.ok and not force:
            raise GainConditionViolated(f"k_d={gains.k_d} must exceed {chk.required_kd:.6g}")
    if scn.dynamics != "observer":
        info.update(_basin(scn, p0, v0))
        if info["initial_error"] >= info["basin_radius"]:
            log.warning("initial error %.4g lies outside the certified basin radius %.4g",
                        info["initial_error"], info["basin_radius"])
    if scn.dynamics == "single":
        trace = simulate_single(g, traj, p0, gains.k_p, scn.dt, scn.horizon, scn.record_every)
    else:
        trace = simulate_double(g, traj, p0, v0, gains.k_p, gains.k_d, scn.dt, scn.horizon, scn.record_every)
    info.update(_terminal(trace))
    return trace, info


def _terminal(trace: SimTrace) -> dict[str, Any]:
    res: dict[str, Any] = {"final_err_p": float(trace.err_p[-1]), "final_err_delta": float(trace.err_delta[-1]),
                           "final_err_v": float(trace.err_v[-1]), "min_separation": float(trace.min_sep.min()),
                           "q0_drift": float(np.abs(trace.q0 - trace.q0[0]).max())}
    half = (trace.t[-1] / 2.0, trace.t[-1])
    try:
        rate, r2 = fit_exponential_rate(trace, "err_delta", half)
        res.update(rate=rate, rate_r2=r2)
    except (BearingFormsError, ValueError):
        res.update(rate=float("nan"), rate_r2=float("nan"))
    return res


def _emit(trace: SimTrace, scn: Scenario, out: Path, info: dict[str, Any]) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "trace.csv").write_text(trace_csv(trace), encoding="utf-8")
    paths = [out / "trace.csv"]
    if len(trace.t) > 1:
        paths += write_plots(trace, scn.graph, out)
    info["artifacts"] = [p.name for p in paths]
    _write_json(out / "report.json", info)


def cmd_simulate(args) -> int:
    scn = _override(_load(args.scenario), args.dt, args.horizon)
    if scn.dynamics == "observer":
        return _observe(scn, args)
    out = Path(args.out)
    try:
        trace, info = run_scenario(scn, args.seed, args.force)
    except BearingLoss as err:
        info = {"scenario": scn.name, "bearing_loss": {"t": err.time, "edge": list(err.edge),
                                                       "separation": err.separation}}
        if err.trace is not None and len(err.trace.t):
            _emit(err.trace, scn, out, info)
        print(f"bearing lost: {err}", file=sys.stderr)
        return EXIT_LOSS
    _emit(trace, scn, out, info)
    print(f"{scn.name}: t_end={trace.t[-1]:g}  ||p~||={info['final_err_p']:.3e}  "
          f"||p~-Uq0||={info['final_err_delta']:.3e}  ||v~||={info['final_err_v']:.3e}")
    print(f"fitted rate (second half) {info['rate']:.4g} (R^2 {info['rate_r2']:.4f}); "
          f"min separation {info['min_separation']:.4g}; wrote {out}")
    return EXIT_OK


def _observe(scn: Scenario, args) -> int:
    out = Path(args.out)
    ph0 = observer_initial(scn, getattr(args, "seed", None))
    trace = simulate_observer(scn.graph, scn.trajectory, ph0, scn.dt, scn.horizon, scn.record_every)
    z = trace.err_delta
    info = {"scenario": scn.name, "hash": scn.digest, "dynamics": "observer", "dt": scn.dt, "horizon": scn.horizon,
            "zeta0": float(z[0]), "zeta_final": float(z[-1]),
            "contraction": float(z[0] / z[-1]) if z[-1] > 0 else float("inf"),
            "xi0_drift": float(np.abs(trace.q0 - trace.q0[0]).max())}
    try:
        info["rate"], info["rate_r2"] = fit_exponential_rate(trace.t, z, (trace.t[-1] / 2, trace.t[-1]))
    except (BearingFormsError, ValueError):
        info["rate"] = info["rate_r2"] = float("nan")
    _emit(trace, scn, out, info)
    print(f"{scn.name} observer: ||zeta|| {info['zeta0']:.3e} -> {info['zeta_final']:.3e} "
          f"(x{info['contraction']:.4g}); xi0 drift {info['xi0_drift']:.2e}; wrote {out}")
    return EXIT_OK


def cmd_observe(args) -> int:
    return _observe(_override(_load(args.scenario), args.dt, args.horizon), args)


# --- scenarios -------------------------------------------------------------

def cmd_scenarios(args) -> int:
    if args.action == "list":
        for name in BUILTINS:
            s = builtin(name)
            print(f"{name:<12} {s.dynamics:<7} n={s.graph.n} d={s.graph.d} m={s.graph.m}")
        return EXIT_OK
    if not args.name:
        raise UsageError("scenarios export needs a name")
    text = builtin_text(args.name)
    if args.file:
        Path(args.file).write_bytes(text.encode("utf-8"))
    else:
        sys.stdout.write(text)
    return EXIT_OK


# --- sweep -----------------------------------------------------------------

SWEEP_KEYS = ("k_p", "k_d", "fraction", "dt", "seed")


def parse_grid(specs: Sequence[str]) -> dict[str, list[float]]:
    """``["k_p=1,2", "k_d=3:9:4"]`` -> values; ``a:b:n`` is ``linspace(a, b, n)``."""
    grid: dict[str, list[float]] = {}
    for s in specs:
        key, sep, vals = s.partition("=")
        key = key.strip()
        if not sep or key not in SWEEP_KEYS:
            raise UsageError(f"bad grid spec {s!r}; use KEY=v1,v2 or KEY=a:b:n with KEY in {SWEEP_KEYS}")
        try:
            if ":" in vals:
                a, b, n = vals.split(":")
                grid[key] = [float(x) for x in np.linspace(float(a), float(b), int(n))]
            else:
                grid[key] = [float(x) for x in vals.split(",") if x.strip()]
        except ValueError as exc:
            raise UsageError(f"bad grid values in {s!r}") from exc
        if not grid[key]:
            raise UsageError(f"empty grid for {key}")
    return grid


def _sweep_one(job: tuple[int, dict[str, Any], dict[str, float], float]) -> dict[str, Any]:
    idx, raw, params, tol = job
    raw = copy.deepcopy(raw)
    row: dict[str, Any] = {"run": idx, **params}
    try:
        gains = raw.setdefault("gains", {})
        for k in ("k_p", "k_d"):
            if k in params:
                gains[k] = params[k]
        if "dt" in params:
            raw.setdefault("integrator", {})["dt"] = params["dt"]
        seed = int(params["seed"]) if "seed" in params else None
        if "fraction" in params:
            prev = raw.get("initial", {}).get("perturb", {})
            raw["initial"] = {"perturb": {"seed": seed if seed is not None else prev.get("seed", 0),
                                          "fraction": params["fraction"]}}
        scn = from_dict(raw)
        trace, info = run_scenario(scn, seed, force=True)
        row.update(status="ok", gain_ok=info.get("gain_ok", ""), final_err_delta=info["final_err_delta"],
                   final_err_v=info["final_err_v"], rate=info["rate"],
                   converged=bool(info["final_err_delta"] < tol and (scn.dynamics != "double"
                                                                      or info["final_err_v"] < tol)))
    except BearingLoss as err:
        row.update(status=f"bearing_loss@{err.time:.3f}", converged=False)
    except Exception as err:  # noqa: BLE001 - every failure becomes a row
        row.update(status=f"error:{type(err).__name__}:{err}", converged=False)
    return row


def _jobs(arg: int | None) -> int:
    if arg is not None:
        return max(1, arg)
    env = os.environ.get("BEARING_FORMS_JOBS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise UsageError(f"BEARING_FORMS_JOBS must be an integer, got {env!r}") from exc
    return 1


def cmd_sweep(args) -> int:
    scn = _override(_load(args.scenario), None, args.horizon)
    grid = parse_grid(args.grid or [])
    if not grid:
        raise UsageError("sweep needs at least one --grid KEY=values")
    keys = list(grid)
    combos = [dict(zip(keys, vals)) for vals in itertools.product(*(grid[k] for k in keys))]
    jobs = [(i, scn.raw, c, args.tol) for i, c in enumerate(combos)]
    n_jobs = _jobs(args.jobs)
    if n_jobs == 1:
        rows = [_sweep_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=n_jobs) as ex:
            rows = list(ex.map(_sweep_one, jobs))
    cols = ["run", *keys, "status", "gain_ok", "converged", "final_err_delta", "final_err_v", "rate"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in sorted(rows, key=lambda r: r["run"]):
        w.writerow([_f(r[c]) if isinstance(r.get(c), float) else r.get(c, "") for c in cols])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep.csv").write_text(buf.getvalue(), encoding="utf-8")
    ok = sum(bool(r["converged"]) for r in rows)
    print(f"{len(rows)} runs, {ok} converged (tol {args.tol:g}); wrote {out / 'sweep.csv'}")
    return EXIT_OK


# --- entry point -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bearing-forms", description="Bearing-based formation analysis and simulation.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    def scenario_arg(sp):
        sp.add_argument("scenario", help="scenario TOML file, or builtin:NAME")
        sp.add_argument("--out", default="out", help="output directory (default ./out)")

    a = sub.add_parser("analyze", help="graph structure, rank history and PE certificate")
    scenario_arg(a)
    a.set_defaults(func=cmd_analyze)

    for name, func, hlp in (("simulate", cmd_simulate, "closed-loop run"), ("observe", cmd_observe, "observer run")):
        s = sub.add_parser(name, help=hlp)
        scenario_arg(s)
        s.add_argument("--dt", type=float)
        s.add_argument("--horizon", type=float)
        s.add_argument("--seed", type=int)
        if name == "simulate":
            s.add_argument("--force", action="store_true", help="run even if the gain condition fails")
        s.set_defaults(func=func)

    sc = sub.add_parser("scenarios", help="list or export built-in scenarios")
    sc.add_argument("action", choices=("list", "export"))
    sc.add_argument("name", nargs="?")
    sc.add_argument("-o", "--file", help="write the export here instead of stdout")
    sc.set_defaults(func=cmd_scenarios)

    sw = sub.add_parser("sweep", help="parameter grid over k_p, k_d, fraction, dt, seed")
    scenario_arg(sw)
    sw.add_argument("--grid", action="append", metavar="KEY=VALUES")
    sw.add_argument("--jobs", type=int, help="parallel runs (default $BEARING_FORMS_JOBS or 1)")
    sw.add_argument("--horizon", type=float)
    sw.add_argument("--tol", type=float, default=1e-2, help="convergence threshold on terminal errors")
    sw.set_defaults(func=cmd_sweep)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ScenarioError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DisconnectedGraph as exc:
        print(f"not BPE: {exc}", file=sys.stderr)
        return EXIT_NEGATIVE
    except RankHypothesisFails as exc:
        print(f"analysis negative: {exc}", file=sys.stderr)
        return EXIT_NEGATIVE
    except BearingLoss as exc:
        print(f"bearing lost: {exc}", file=sys.stderr)
        return EXIT_LOSS
    except BearingFormsError as exc:
        if isinstance(exc, InvalidGain):
            print(f"gain violation: {exc}", file=sys.stderr)
            return EXIT_GAIN
        raise


if __name__ == "__main__":
    sys.exit(main())
