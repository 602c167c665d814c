from __future__ import annotations

import time

import numpy as np
import pytest

from bearing_forms.scenario_io import observer_initial
from bearing_forms.scenarios import builtin
from bearing_forms.sim import simulate_double, simulate_observer, simulate_single

_RESULTS: list[tuple[str, bool, str]] = []
_START = time.perf_counter()


def record_criterion(label: str, ok: bool, detail: str) -> None:
    line = f"{label}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line)
    _RESULTS.append((label, ok, detail))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for label, ok, detail in sorted(_RESULTS, key=lambda r: r[0]):
        tr.write_line(f"{label}: {'PASS' if ok else 'FAIL'}  {detail}")
    elapsed = time.perf_counter() - _START
    tr.write_line(f"suite wall time {elapsed:.1f} s ({'PASS' if elapsed < 300 else 'FAIL'} against 300 s)")


@pytest.fixture(scope="session")
def cube():
    return builtin("cube8_3d")


@pytest.fixture(scope="session")
def square():
    return builtin("square4_2d")


@pytest.fixture(scope="session")
def pyramid():
    return builtin("pyramid4_3d")


@pytest.fixture(scope="session")
def cube_run(cube):
    """The 50 s cube run at dt = 1e-3, with its wall time."""
    t0 = time.perf_counter()
    tr = simulate_single(cube.graph, cube.trajectory, cube.initial["positions"].ravel(), cube.gains.k_p,
                         dt=1e-3, horizon=50.0, record_every=10)
    return tr, time.perf_counter() - t0


def _double(scn):
    return simulate_double(scn.graph, scn.trajectory, scn.initial["positions"].ravel(),
                           scn.initial["velocities"].ravel(), scn.gains.k_p, scn.gains.k_d,
                           dt=1e-3, horizon=30.0, record_every=1)


@pytest.fixture(scope="session")
def square_run(square):
    return _double(square)


@pytest.fixture(scope="session")
def pyramid_run(pyramid):
    return _double(pyramid)


@pytest.fixture(scope="session")
def cube_observer_run(cube):
    return simulate_observer(cube.graph, cube.trajectory, observer_initial(cube), dt=1e-3, horizon=20.0,
                             record_every=10)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
