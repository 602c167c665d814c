from __future__ import annotations

import csv
import json

import numpy as np
import pytest
import tomli

from bearing_forms.cli import main, parse_grid
from bearing_forms.scenario_io import dump_scenario
from bearing_forms.scenarios import BUILTINS, builtin_text
from bearing_forms.sim import rk4_step


def _run(argv, capsys=None):
    try:
        code = main([str(a) for a in argv])
    except SystemExit as exc:
        code = exc.code
    return code


def _write(tmp_path, raw, name="s.toml"):
    path = tmp_path / name
    path.write_text(dump_scenario(raw))
    return path


def _builtin_raw(name, horizon=1.0):
    raw = tomli.loads(builtin_text(name))
    raw["integrator"]["horizon"] = horizon
    return raw


def _read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


STATIC_P3 = {
    "name": "static_p3", "dynamics": "single",
    "graph": {"n": 3, "d": 2, "edges": [[1, 2], [2, 3]]},
    "trajectory": {"type": "similarity", "base": [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]]},
    "initial": {"positions": [[0.0, 0.1], [1.0, 0.0], [1.1, 1.0]]},
    "integrator": {"horizon": 0.5},
}


def test_usage_errors_exit_64(tmp_path):
    assert _run([]) == 64
    assert _run(["frobnicate"]) == 64
    assert _run(["simulate"]) == 64
    assert _run(["scenarios", "export"]) == 64
    assert _run(["scenarios", "export", "nonesuch"]) == 64
    bad = tmp_path / "bad.toml"
    bad.write_text("dynamics = = 1\n")
    assert _run(["simulate", bad, "--out", tmp_path / "o"]) == 64
    assert _run(["simulate", tmp_path / "missing.toml"]) == 64
    assert _run(["sweep", "builtin:square4_2d", "--grid", "zeta=1,2"]) == 64


def test_scenarios_list(capsys):
    assert _run(["scenarios", "list"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert [ln.split()[0] for ln in lines] == list(BUILTINS)


@pytest.mark.parametrize("name", BUILTINS)
def test_scenarios_export_is_byte_exact(name, tmp_path, capsys):
    assert _run(["scenarios", "export", name]) == 0
    assert capsys.readouterr().out == builtin_text(name)
    dest = tmp_path / "x.toml"
    assert _run(["scenarios", "export", name, "-o", dest]) == 0
    assert dest.read_bytes() == builtin_text(name).encode("utf-8")


def test_analyze_positive_and_negative(tmp_path):
    assert _run(["analyze", "builtin:square4_2d", "--out", tmp_path / "a"]) == 0
    assert (tmp_path / "a" / "analysis.csv").exists()
    assert _run(["analyze", _write(tmp_path, STATIC_P3), "--out", tmp_path / "b"]) == 2


def test_simulate_outputs(tmp_path):
    out = tmp_path / "o"
    assert _run(["simulate", _write(tmp_path, _builtin_raw("square4_2d")), "--out", out]) == 0
    header, data = _read_csv(out / "trace.csv")
    assert header == (["t"] + [f"p{i}{a}" for i in range(1, 5) for a in "xy"]
                      + [f"v{i}{a}" for i in range(1, 5) for a in "xy"]
                      + ["err_p", "err_delta", "err_v", "min_sep"])
    assert data.shape == (101, len(header))
    rep = json.loads((out / "report.json").read_text())
    assert rep["gain_ok"] is True and rep["dynamics"] == "double"
    assert (out / "errors.svg").exists() and (out / "trajectory.svg").exists()


def test_simulate_is_byte_deterministic(tmp_path):
    path = _write(tmp_path, _builtin_raw("cube8_3d", horizon=0.5))
    assert _run(["simulate", path, "--out", tmp_path / "a"]) == 0
    assert _run(["simulate", path, "--out", tmp_path / "b"]) == 0
    for f in ("trace.csv", "report.json", "errors.svg", "trajectory.svg"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_dt_override_changes_little(tmp_path):
    path = _write(tmp_path, _builtin_raw("square4_2d"))
    assert _run(["simulate", path, "--out", tmp_path / "a", "--dt", "1e-3"]) == 0
    assert _run(["simulate", path, "--out", tmp_path / "b", "--dt", "2e-3"]) == 0
    _, a = _read_csv(tmp_path / "a" / "trace.csv")
    _, b = _read_csv(tmp_path / "b" / "trace.csv")
    assert np.abs(a[-1, 1:17] - b[-1, 1:17]).max() < 1e-6


def test_gain_violation_and_force(tmp_path):
    raw = _builtin_raw("square4_2d")
    raw["gains"]["k_d"] = 5.0
    path = _write(tmp_path, raw)
    assert _run(["simulate", path, "--out", tmp_path / "a"]) == 3
    assert _run(["simulate", path, "--out", tmp_path / "b", "--force"]) in (0, 4)
    rep = json.loads((tmp_path / "b" / "report.json").read_text())
    assert rep["gain_ok"] is False


def _head_on_speed(k_d: float, dt: float, steps: int) -> float:
    def gap(a: float) -> float:
        f = lambda t, y: np.array([y[1], -k_d * y[1]])
        y = np.array([1.0, -2.0 * a])
        for k in range(steps):
            y = rk4_step(f, k * dt, y, dt)
        return y[0]
    g0, g1 = gap(0.0), gap(1.0)
    return -g0 / (g1 - g0)


def test_bearing_loss_exits_4(tmp_path):
    a = _head_on_speed(2.0, 1e-3, 300)
    raw = {"name": "head_on", "dynamics": "double",
           "graph": {"n": 2, "d": 2, "edges": [[1, 2]]},
           "trajectory": {"type": "similarity", "base": [[0.0, 0.0], [1.0, 0.0]]},
           "gains": {"k_p": 1.0, "k_d": 2.0},
           "initial": {"positions": [[0.0, 0.0], [1.0, 0.0]], "velocities": [[a, 0.0], [-a, 0.0]]},
           "integrator": {"horizon": 1.0, "record_every": 1}}
    out = tmp_path / "o"
    assert _run(["simulate", _write(tmp_path, raw), "--out", out]) == 4
    _, data = _read_csv(out / "trace.csv")
    assert 0.29 < data[-1, 0] < 0.3
    rep = json.loads((out / "report.json").read_text())
    assert rep["bearing_loss"]["edge"] == [1, 2]


def test_observe(tmp_path, capsys):
    raw = _builtin_raw("cube8_3d", horizon=0.5)
    out = tmp_path / "o"
    assert _run(["observe", _write(tmp_path, raw), "--out", out]) == 0
    header, data = _read_csv(out / "trace.csv")
    assert header[-3:] == ["err_delta", "xi0_drift", "min_sep"]
    assert data[:, -2].max() < 1e-12
    rep = json.loads((out / "report.json").read_text())
    assert rep["zeta0"] == pytest.approx(1.0)


def test_parse_grid():
    g = parse_grid(["k_p=1,2", "k_d=3:9:4"])
    assert g == {"k_p": [1.0, 2.0], "k_d": [3.0, 5.0, 7.0, 9.0]}


def test_sweep_gain_boundary_and_duplicate_seeds(tmp_path):
    path = _write(tmp_path, _builtin_raw("square4_2d", horizon=0.2))
    out = tmp_path / "o"
    code = _run(["sweep", path, "--out", out, "--grid", "k_d=5,11", "--grid", "fraction=0.5",
                 "--grid", "seed=3,3"])
    assert code == 0
    with open(out / "sweep.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 4
    assert [r["gain_ok"] for r in rows] == ["False", "False", "True", "True"]
    strip = lambda r: {k: v for k, v in r.items() if k != "run"}
    assert strip(rows[0]) == strip(rows[1]) and strip(rows[2]) == strip(rows[3])
    assert all(r["status"] == "ok" for r in rows)


def test_sweep_parallel_matches_serial(tmp_path, monkeypatch):
    path = _write(tmp_path, _builtin_raw("square4_2d", horizon=0.1))
    assert _run(["sweep", path, "--out", tmp_path / "a", "--grid", "k_p=1,2"]) == 0
    monkeypatch.setenv("BEARING_FORMS_JOBS", "2")
    assert _run(["sweep", path, "--out", tmp_path / "b", "--grid", "k_p=1,2"]) == 0
    assert (tmp_path / "a" / "sweep.csv").read_bytes() == (tmp_path / "b" / "sweep.csv").read_bytes()
