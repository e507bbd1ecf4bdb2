"""Kinetic BGK / ES-BGK solver with high-order embedded-boundary treatment."""

from .errors import SolverError
from .geometry import Circle, HalfPlane, Intersection, Interval, Polygon, Union, box
from .phase_mesh import GhostPoint, PhaseMesh, SpatialGrid, VelocityGrid, boundary_foot, classify_points

__all__ = [
    "Circle",
    "GhostPoint",
    "HalfPlane",
    "Intersection",
    "Interval",
    "PhaseMesh",
    "Polygon",
    "SolverError",
    "SpatialGrid",
    "Union",
    "VelocityGrid",
    "boundary_foot",
    "box",
    "classify_points",
]
