"""Bearing-based formation analysis and control with persistence-of-excitation certificates."""

from __future__ import annotations

from .bearing import BearingState, bearing, bearing_laplacian, bearing_laplacian_rank, projector
from .control import control_double, control_single
from .graph import FormationGraph, build_graph, has_spanning_tree, is_acyclic, min_rigid_edge_count
from .pe import (PECertificate, acyclic_bpe_check, certify_bearing_laplacian_pe, certify_direction_pe,
                 certify_projector_sum_pe, is_bpe, min_pe_bearing_lower_bound, rank_based_bpe_check,
                 vertex_addition, window_average)
from .scenario_io import Scenario, load_scenario, parse_scenario
from .scenarios import BUILTINS, builtin
from .sim import SimTrace, simulate_double, simulate_observer, simulate_single
from .stability import (GainSet, StabilityBound, basin_radius_double, basin_radius_single,
                        fit_exponential_rate, lemma8_c, rate_bound, validate_gains)
from .trajectory import DesiredTrajectory, rotation_about_axis

__version__ = "0.1.0"

__all__ = [
    "BUILTINS", "BearingState", "DesiredTrajectory", "FormationGraph", "GainSet", "PECertificate", "SimTrace",
    "Scenario", "StabilityBound", "acyclic_bpe_check", "basin_radius_double", "basin_radius_single", "bearing",
    "bearing_laplacian", "bearing_laplacian_rank", "build_graph", "builtin", "certify_bearing_laplacian_pe",
    "certify_direction_pe", "certify_projector_sum_pe", "control_double", "control_single",
    "fit_exponential_rate", "has_spanning_tree", "is_acyclic", "is_bpe", "lemma8_c", "load_scenario",
    "min_pe_bearing_lower_bound", "min_rigid_edge_count", "parse_scenario", "projector", "rank_based_bpe_check",
    "rate_bound", "rotation_about_axis", "simulate_double", "simulate_observer", "simulate_single",
    "validate_gains", "vertex_addition", "window_average",
]
