"""Exception hierarchy shared across the package."""

from __future__ import annotations


class BearingFormsError(Exception):
    """Base class for all errors raised by bearing_forms."""


class GraphError(BearingFormsError, ValueError):
    pass


class SelfLoop(GraphError):
    pass


class DuplicateEdge(GraphError):
    pass


class VertexOutOfRange(GraphError):
    pass


class EmptyEdgeSet(GraphError):
    pass


class DisconnectedGraph(GraphError):
    pass


class NotAcyclic(GraphError):
    pass


class TooFewEdges(GraphError):
    pass


class NotUnitVector(BearingFormsError, ValueError):
    pass


class CoincidentAgents(BearingFormsError):
    """Two agents joined by an edge are closer than the coincidence threshold."""

    def __init__(self, edge: tuple[int, int], separation: float, message: str | None = None):
        self.edge = edge
        self.separation = separation
        super().__init__(
            message or f"agents {edge[0]} and {edge[1]} coincide (separation {separation:.3e})"
        )


class BearingLoss(CoincidentAgents):
    """Raised mid-simulation when an edge collapses below the coincidence threshold."""

    def __init__(self, time: float, edge: tuple[int, int], separation: float, trace=None):
        self.time = time
        self.trace = trace
        super().__init__(
            edge,
            separation,
            f"bearing lost at t={time:.6g} on edge {edge} (separation {separation:.3e})",
        )


class InvalidWindow(BearingFormsError, ValueError):
    pass


class EmptyDirectionSet(BearingFormsError, ValueError):
    pass


class RankHypothesisFails(BearingFormsError):
    def __init__(self, time: float, rank: int, expected: int):
        self.time = time
        self.rank = rank
        self.expected = expected
        super().__init__(f"rank(L_B) = {rank} != {expected} at t={time:.6g}")


class BaseNotBPE(BearingFormsError):
    pass


class InvalidNewEdges(BearingFormsError, ValueError):
    pass


class OutsideHorizon(BearingFormsError, ValueError):
    pass


class UnsupportedDimension(BearingFormsError, ValueError):
    pass


class InvalidGain(BearingFormsError, ValueError):
    pass


class GainConditionViolated(InvalidGain):
    pass


class InvalidInput(BearingFormsError, ValueError):
    pass


class NonPositiveSamples(BearingFormsError, ValueError):
    pass


class ScenarioError(BearingFormsError, ValueError):
    """Malformed or inconsistent scenario file."""
