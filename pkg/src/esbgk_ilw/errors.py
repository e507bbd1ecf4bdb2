"""Exception hierarchy for the solver.

Every error raised on purpose by the package derives from ``SolverError`` so
callers (the CLI in particular) can separate numerical aborts from bugs.
"""

from __future__ import annotations


class SolverError(Exception):
    """Base class for all package errors."""


# -- mesh / geometry --------------------------------------------------------


class BoundaryTooCloseToBox(SolverError):
    pass


class DegenerateGeometry(SolverError):
    pass


class ProjectionDiverged(SolverError):
    pass


# -- moments / collision ----------------------------------------------------


class EmptyDensity(SolverError):
    pass


class NegativeDensity(SolverError):
    """f is negative beyond the tolerated extrapolation noise."""


class NonPositiveTemperature(SolverError):
    pass


class TensorNotSPD(SolverError):
    pass


# -- reconstruction ---------------------------------------------------------


class NonFiniteInput(SolverError):
    pass


class StencilOutsideDomain(SolverError):
    pass


class InsufficientInterior(SolverError):
    """Fewer than nine admissible stencil nodes.

    ``fallback`` carries the largest admissible nested stencil so the caller
    can continue with reduced order.
    """

    def __init__(self, message: str, fallback=None):
        super().__init__(message)
        self.fallback = fallback


class CollinearFeetRequired(SolverError):
    pass


# -- boundary ---------------------------------------------------------------


class ZeroWallFlux(SolverError):
    pass


class MirrorOutsideInterior(SolverError):
    pass


class GhostFillError(SolverError):
    """Wraps a per-ghost failure with the ghost's identification."""

    def __init__(self, message: str, ghost_index=None, label=None):
        super().__init__(message)
        self.ghost_index = ghost_index
        self.label = label


class GhostNotFilled(SolverError):
    pass


# -- time stepping ----------------------------------------------------------


class NonFiniteState(SolverError):
    def __init__(self, message: str, step=None, time=None, node=None):
        super().__init__(message)
        self.step = step
        self.time = time
        self.node = node


# -- scenarios / config -----------------------------------------------------


class UnknownScenario(SolverError):
    pass


class NonNestedLadder(SolverError):
    pass


class NotSteady(SolverError):
    pass


class ConfigError(SolverError):
    pass


class ParseError(ConfigError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        loc = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{loc}")
        self.line = line
        self.column = column


class ValidationError(ConfigError):
    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


class IoError(SolverError):
    """An output file could not be written."""
