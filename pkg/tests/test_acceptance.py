"""Acceptance criteria, one PASS/FAIL line each (also collected in the terminal summary).

Thresholds are asserted exactly as stated; companion measurements are printed in
the detail text so a failure shows how far off the run is.
"""

from __future__ import annotations

import itertools
import math
import subprocess
import sys
from pathlib import Path

import numpy as np

from bearing_forms.cli import trace_csv
from bearing_forms.graph import build_graph, min_rigid_edge_count
from bearing_forms.pe import certify_bearing_laplacian_pe, certify_direction_pe, is_bpe, min_pe_bearing_lower_bound
from bearing_forms.scenarios import BUILTINS, builtin
from bearing_forms.sim import simulate_single
from bearing_forms.stability import (certified_single_bound, fit_exponential_rate, lemma8_c, lemma8_matrices,
                                     rate_bound, validate_gains)
from bearing_forms.trajectory import static_trajectory

from conftest import record_criterion

ROOT = Path(__file__).resolve().parents[1]
TRANSIENT = 6.0  # one bearing period of the cube motion


def _check(label: str, ok: bool, detail: str) -> None:
    record_criterion(label, bool(ok), detail)
    assert ok, f"{label}: {detail}"


# --- 1: cube ------------------------------------------------------------------

def test_c1_cube_monotone_after_transient(cube_run):
    tr, _ = cube_run
    ep = tr.err_p
    rises = np.where(np.diff(ep) > 1e-12 * ep[0])[0]
    onset = 0.0 if len(rises) == 0 else float(tr.t[rises[-1] + 1])
    _check("C1a cube ||p~|| monotone after transient", onset <= TRANSIENT,
           f"non-increasing from t={onset:g} s (transient allowance {TRANSIENT:g} s)")


def test_c1_cube_five_percent_by_25s(cube_run):
    tr, _ = cube_run
    i = tr.at(25.0)
    ratio = tr.err_p[i] / tr.err_p[0]
    _check("C1b cube ||p~(25)|| < 5% ||p~(0)||", ratio < 0.05,
           f"||p~(25)||={tr.err_p[i]:.4g} = {100 * ratio:.2f}% of {tr.err_p[0]:.4g}; "
           f"floor n^0.5 ||q0||={math.sqrt(tr.n) * np.linalg.norm(tr.q0[0]):.4g}; ||delta(25)||={tr.err_delta[i]:.3g}")


def test_c1_cube_below_1e2_by_50s(cube_run):
    tr, _ = cube_run
    i = tr.at(50.0)
    _check("C1c cube ||p~(50)|| < 1e-2", tr.err_p[i] < 1e-2,
           f"||p~(50)||={tr.err_p[i]:.4g}; q0={np.array2string(tr.q0[0], precision=4)}; "
           f"||delta(50)||={tr.err_delta[i]:.3g}")


def test_c1_cube_centroid_drift(cube_run):
    tr, _ = cube_run
    drift = float(np.abs(tr.q0 - tr.q0[0]).max())
    _check("C1d cube q0 drift <= 1e-8", drift <= 1e-8, f"max drift {drift:.2e}")


def test_c1_cube_runtime(cube_run):
    tr, wall = cube_run
    _check("C1e cube 50 s run < 30 s wall at dt=1e-3", wall < 30.0, f"{wall:.1f} s for {len(tr.t)} records")


# --- 2, 3: double integrator ---------------------------------------------------

def _double_checks(scn, tr):
    i = tr.at(30.0)
    ed, ev = tr.err_delta[i], tr.err_v[i]
    k_d = scn.gains.k_d
    pred = tr.q0[0] + np.outer((1.0 - np.exp(-k_d * tr.t)) / k_d, tr.q0_dot[0])
    cen = float(np.abs(tr.q0 - pred).max())
    return ed, ev, cen


def test_c2_square_gains(square):
    chk = validate_gains(square.graph, square.gains.k_p, square.gains.k_d)
    req = 2.0 * (2.0 + math.sqrt(2.0)) + 1.0
    _check("C2a square validate_gains", chk.ok and abs(chk.required_kd - req) < 1e-12,
           f"required k_d > {chk.required_kd:.4f} (closed form {req:.4f}), margin {chk.margin:.3f}")


def test_c2_square_convergence(square, square_run):
    ed, ev, _ = _double_checks(square, square_run)
    _check("C2b square ||p~-Uq0||, ||v~|| < 1e-2 by 30 s", ed < 1e-2 and ev < 1e-2,
           f"||p~-Uq0(30)||={ed:.4g}, ||v~(30)||={ev:.4g}")


def test_c2_square_centroid(square, square_run):
    _, _, cen = _double_checks(square, square_run)
    _check("C2c square centroid closed form to 1e-6", cen <= 1e-6, f"max deviation {cen:.2e}")


def test_c3_pyramid_gains(pyramid):
    chk = validate_gains(pyramid.graph, pyramid.gains.k_p, pyramid.gains.k_d)
    _check("C3a pyramid validate_gains", chk.ok, f"required k_d > {chk.required_kd:.4f}, margin {chk.margin:.3f}")


def test_c3_pyramid_convergence(pyramid, pyramid_run):
    ed, ev, _ = _double_checks(pyramid, pyramid_run)
    P0 = pyramid.initial["positions"]
    dup = [(i + 1, j + 1) for i, j in itertools.combinations(range(len(P0)), 2) if np.allclose(P0[i], P0[j])]
    _check("C3b pyramid ||p~-Uq0||, ||v~|| < 1e-2 by 30 s", ed < 1e-2 and ev < 1e-2,
           f"||p~-Uq0(30)||={ed:.4g}, ||v~(30)||={ev:.4g}; coincident initial agents {dup}")


def test_c3_pyramid_centroid(pyramid, pyramid_run):
    _, _, cen = _double_checks(pyramid, pyramid_run)
    _check("C3c pyramid centroid closed form to 1e-6", cen <= 1e-6, f"max deviation {cen:.2e}")


# --- 4: observer ---------------------------------------------------------------

def test_c4_observer_contraction(cube, cube_observer_run):
    tr = cube_observer_run
    z = tr.err_delta
    verdict = is_bpe(cube.graph, cube.trajectory, cube.pe["T"], cube.pe["mu_min"])
    c = z[0] / z[-1]
    rate, _ = fit_exponential_rate(tr.t, z, (10.0, 20.0))
    _check("C4a observer ||zeta|| contracts >= 1e3 over 20 s", verdict.bpe and abs(z[0] - 1.0) < 1e-12 and c >= 1e3,
           f"BPE={verdict.bpe}, ||zeta(0)||={z[0]:.6f}, contraction x{c:.4g}, tail rate {rate:.3g}/s")


def test_c4_observer_centroid(cube_observer_run):
    tr = cube_observer_run
    drift = float(np.abs(tr.q0 - tr.q0[0]).max())
    _check("C4b observer xi0 constant to 1e-8", drift <= 1e-8, f"max drift {drift:.2e}")


# --- 5: PE certificates ---------------------------------------------------------

def test_c5_rotating_planar_bearing():
    w = math.pi / 3
    cert = certify_direction_pe(lambda t: np.array([math.cos(w * t), math.sin(w * t)]), 6.0, period=6.0)
    _check("C5a rotating planar bearing mu = 0.5", abs(cert.mu - 0.5) <= 1e-6, f"mu={cert.mu:.12f}")


def test_c5_static_tree():
    g = build_graph(3, [(1, 2), (2, 3)], 2)
    cert = certify_bearing_laplacian_pe(g, static_trajectory([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]]), 1.0)
    _check("C5b static tree mu <= 1e-9", cert.mu <= 1e-9, f"mu={cert.mu:.3e}")


def test_c5_scenarios_certify():
    parts = []
    ok = True
    for name in BUILTINS:
        s = builtin(name)
        v = is_bpe(s.graph, s.trajectory, s.pe["T"], 1e-3)
        mu = v.certificate.mu if v.certificate is not None else float("nan")
        ok &= bool(v.bpe and mu >= 1e-3)
        parts.append(f"{name} mu={mu:.4g}")
    _check("C5c all scenarios certify BPE with mu >= 1e-3", ok, "; ".join(parts))


# --- 6: structural formulas -------------------------------------------------------

def test_c6_planar_count():
    bad = [n for n in range(4, 21) if min_rigid_edge_count(n, 2) != 2 * n - 3]
    _check("C6a f(n,2) = 2n-3 for n=4..20", not bad, f"mismatches at n={bad}")


def _general_branch(n: int, d: int) -> int:
    q, r = divmod(n - 2, d - 1)
    return 1 + q * d + r + (1 if r else 0)


def test_c6_branch_agreement():
    rows = [(d, min_rigid_edge_count(d + 1, d), _general_branch(d + 1, d)) for d in range(2, 7)]
    _check("C6b f branches agree at n=d+1, d=2..6", all(a == b == d + 1 for d, a, b in rows),
           ", ".join(f"d={d}: {a}/{b}" for d, a, b in rows))


def test_c6_tree_bound_equals_m():
    rows = [(n, min_pe_bearing_lower_bound(n - 1, n, 2)) for n in range(3, 9)]
    _check("C6c PE-bearing bound = m for trees, d=2, n=3..8", all(b == n - 1 for n, b in rows),
           ", ".join(f"n={n}: {b}" for n, b in rows))


# --- 7: stability calculators -------------------------------------------------------

def test_c7_rate_bound_grid():
    vals = (1e-3, 0.1, 1.0, 10.0, 1e3)
    worst_lo, worst_hi, count = 1.0, 0.0, 0
    for lam1, lam2, lam_s, gamma, T, c in itertools.product(vals, repeat=6):
        for frac in (1e-6, 0.5, 1.0):
            s = rate_bound(lam1, lam2, lam_s, gamma, frac * lam_s, T, c).sigma
            worst_lo, worst_hi, count = min(worst_lo, s), max(worst_hi, s), count + 1
    _check("C7a rate_bound sigma in (0,1) on valid grid", 0.0 < worst_lo and worst_hi < 1.0,
           f"{count} points, sigma range [{worst_lo:.3e}, {worst_hi:.6f}]")


def test_c7_block_constant():
    graphs = {"K2 d=2": build_graph(2, [(1, 2)], 2), "P4 d=2": build_graph(4, [(1, 2), (2, 3), (3, 4)], 2),
              "P4 d=3": build_graph(4, [(1, 2), (2, 3), (3, 4)], 3)}
    psd, tight = True, []
    for label, g in graphs.items():
        for k_p, k_d in ((1.0, 3.0), (8.0, 11.0), (7.0, 10.0)):
            r = lemma8_c(g, k_p, k_d)
            MQ, MA = lemma8_matrices(g, k_p, k_d)
            psd &= np.linalg.eigvalsh(r.c * MQ - MA)[0] >= -1e-9
            if np.linalg.eigvalsh(0.99 * r.c * MQ - MA)[0] < 0:
                tight.append(f"{label} ({k_p:g},{k_d:g})")
    _check("C7b lemma8_c PSD and fails at 0.99c", psd and bool(tight), f"fails at 0.99c on {len(tight)}/9: "
           + ", ".join(tight[:3]))


def test_c7_cube_rate_meets_certificate(cube, cube_run):
    tr, _ = cube_run
    cert = certify_bearing_laplacian_pe(cube.graph, cube.trajectory, cube.pe["T"])
    bound = certified_single_bound(cube.graph, cube.trajectory, cert, cube.gains.k_p, float(tr.err_delta[0]))
    rate, r2 = fit_exponential_rate(tr, "err_delta", (25.0, 50.0))
    env = bound.amplitude * tr.err_delta[0] * np.exp(-bound.decay * tr.t)
    _check("C7c cube fitted decay >= certified sigma/(2T)", rate >= bound.decay,
           f"fitted {rate:.4g}/s (R^2 {r2:.4f}) vs certified {bound.decay:.3e}/s; "
           f"envelope respected: {bool(np.all(tr.err_delta <= env * (1 + 1e-12)))}")


# --- 8: property suites ---------------------------------------------------------------

def test_c8_standalone_property_suites():
    files = ["tests/test_bearing.py", "tests/test_graph.py"]
    res = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", *files], cwd=ROOT,
                         capture_output=True, text=True)
    tail = res.stdout.strip().splitlines()[-1] if res.stdout.strip() else res.stderr[-200:]
    _check("C8a projector/Laplacian/orientation/similarity suites standalone", res.returncode == 0, tail)


def test_c8_lyapunov_per_step(cube_run, square, square_run):
    V1 = cube_run[0].lyapunov_single()
    V2 = square_run.lyapunov_double(square.gains.k_d)
    r1, r2 = float(np.diff(V1).max()), float(np.diff(V2).max())
    _check("C8b Lyapunov increase <= 1e-9 per step", r1 <= 1e-9 and r2 <= 1e-9,
           f"max step increase single {r1:.2e}, double {r2:.2e}")


def test_c8_dt_halving_and_csv(square):
    g, tr = square.graph, square.trajectory
    p0 = square.initial["positions"].ravel()
    a = simulate_single(g, tr, p0, 2.0, dt=1e-3, horizon=2.0)
    b = simulate_single(g, tr, p0, 2.0, dt=5e-4, horizon=2.0)
    diff = float(np.abs(a.p[-1] - b.p[-1]).max())
    c = simulate_single(g, tr, p0, 2.0, dt=1e-3, horizon=2.0)
    same = trace_csv(a).encode() == trace_csv(c).encode()
    _check("C8c RK4 dt-halving within 1e-6 and CSV byte-determinism", diff < 1e-6 and same,
           f"max |p(dt) - p(dt/2)| = {diff:.2e}; CSV identical: {same}")
