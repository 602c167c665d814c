"""Built-in scenarios shipped as TOML files in the package data."""

from __future__ import annotations

from importlib import resources
from typing import NamedTuple

import numpy as np
from numpy.typing import NDArray

from .errors import ScenarioError
from .graph import FormationGraph
from .scenario_io import Scenario, parse_scenario
from .stability import GainSet
from .trajectory import DesiredTrajectory

BUILTINS = ("cube8_3d", "square4_2d", "pyramid4_3d")


class ScenarioParts(NamedTuple):
    graph: FormationGraph
    trajectory: DesiredTrajectory
    gains: GainSet
    positions: NDArray[np.float64]
    velocities: NDArray[np.float64] | None


def builtin_text(name: str) -> str:
    if name not in BUILTINS:
        raise ScenarioError(f"unknown scenario {name!r}; choose from {', '.join(BUILTINS)}")
    return resources.files("bearing_forms.data").joinpath(f"{name}.toml").read_text(encoding="utf-8")


def builtin(name: str) -> Scenario:
    return parse_scenario(builtin_text(name), f"<builtin {name}>")


def _parts(name: str) -> ScenarioParts:
    s = builtin(name)
    v = s.initial.get("velocities")
    return ScenarioParts(s.graph, s.trajectory, s.gains, s.initial["positions"].ravel(),
                         None if v is None else v.ravel())


def scenario_cube8_3d() -> ScenarioParts:
    return _parts("cube8_3d")


def scenario_square4_2d() -> ScenarioParts:
    return _parts("square4_2d")


def scenario_pyramid4_3d() -> ScenarioParts:
    return _parts("pyramid4_3d")
