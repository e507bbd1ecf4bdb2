"""Embedded geometry described by signed-distance primitives.

Convention: the signed distance ``d`` is negative inside the fluid domain and
positive outside.  Every primitive is built from labelled *pieces* (segments,
lines, circles); a piece knows its unsigned distance, its closest point and
its outward normal, which is all the ghost-point machinery needs.

Composite shapes use ``Intersection`` (max of distances) and ``Union`` (min).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGeometry


def _as_points(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    return p.reshape(1, -1) if p.ndim == 1 else p


# ---------------------------------------------------------------------------
# pieces
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Segment:
    """Straight boundary piece from ``a`` to ``b``.

    ``outward`` is the unit normal pointing out of the fluid domain.
    ``infinite`` turns the segment into a full line (half-plane boundary).
    """

    a: tuple[float, float]
    b: tuple[float, float]
    outward: tuple[float, float]
    label: str
    piece_id: str
    infinite: bool = False

    straight = True

    def closest(self, p: np.ndarray) -> np.ndarray:
        a = np.asarray(self.a)
        t = np.asarray(self.b) - a
        s = ((p - a) @ t) / (t @ t)
        if not self.infinite:
            s = np.clip(s, 0.0, 1.0)
        return a + s[:, None] * t

    def distance(self, p: np.ndarray) -> np.ndarray:
        return np.linalg.norm(p - self.closest(p), axis=1)

    def outward_normal(self, p: np.ndarray) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.outward, dtype=float), p.shape).copy()

    def tangent(self) -> np.ndarray:
        t = np.asarray(self.b, dtype=float) - np.asarray(self.a, dtype=float)
        return t / np.linalg.norm(t)


@dataclass(frozen=True)
class Arc:
    """Full circle piece.  ``fluid_inside`` selects which side is fluid."""

    center: tuple[float, float]
    radius: float
    fluid_inside: bool
    label: str
    piece_id: str

    straight = False

    def closest(self, p: np.ndarray) -> np.ndarray:
        c = np.asarray(self.center)
        r = p - c
        nr = np.linalg.norm(r, axis=1)
        nr = np.where(nr == 0.0, 1.0, nr)
        return c + self.radius * r / nr[:, None]

    def distance(self, p: np.ndarray) -> np.ndarray:
        return np.abs(np.linalg.norm(p - np.asarray(self.center), axis=1) - self.radius)

    def outward_normal(self, p: np.ndarray) -> np.ndarray:
        r = p - np.asarray(self.center)
        r = r / np.linalg.norm(r, axis=1)[:, None]
        return r if self.fluid_inside else -r


# ---------------------------------------------------------------------------
# shapes
# ---------------------------------------------------------------------------


class Shape:
    """Base class for 2D signed-distance shapes."""

    def sdf(self, p) -> np.ndarray:
        raise NotImplementedError

    def gradient(self, p) -> np.ndarray:
        raise NotImplementedError

    def pieces(self) -> list:
        raise NotImplementedError

    def labels(self) -> set[str]:
        return {pc.label for pc in self.pieces()}

    def __and__(self, other: Shape) -> Shape:
        return Intersection(self, other)

    def __or__(self, other: Shape) -> Shape:
        return Union(self, other)


class HalfPlane(Shape):
    """Fluid on the side ``(x - point) . inward_normal > 0``."""

    def __init__(self, point, inward_normal, label: str):
        n = np.asarray(inward_normal, dtype=float)
        self.n = n / np.linalg.norm(n)
        self.point = np.asarray(point, dtype=float)
        t = np.array([-self.n[1], self.n[0]])
        self._piece = Segment(
            tuple(self.point), tuple(self.point + t), tuple(-self.n), label, f"{label}#0", infinite=True
        )

    def sdf(self, p):
        return -(_as_points(p) - self.point) @ self.n

    def gradient(self, p):
        p = _as_points(p)
        return np.broadcast_to(-self.n, p.shape).copy()

    def pieces(self):
        return [self._piece]


class Circle(Shape):
    """Disk of radius ``radius``; fluid inside unless ``obstacle`` is set."""

    def __init__(self, center, radius: float, label: str, obstacle: bool = False):
        if radius <= 0:
            raise DegenerateGeometry("circle radius must be positive")
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        self.obstacle = obstacle
        self._piece = Arc(tuple(self.center), self.radius, not obstacle, label, f"{label}#0")

    def sdf(self, p):
        d = np.linalg.norm(_as_points(p) - self.center, axis=1) - self.radius
        return -d if self.obstacle else d

    def gradient(self, p):
        r = _as_points(p) - self.center
        nr = np.linalg.norm(r, axis=1)
        nr = np.where(nr == 0.0, 1.0, nr)
        g = r / nr[:, None]
        return -g if self.obstacle else g

    def pieces(self):
        return [self._piece]


class Polygon(Shape):
    """Simple polygon with one label per edge.

    Edge ``k`` joins ``vertices[k]`` to ``vertices[k+1]``.  The distance is
    exact (minimum over edges, sign from an even-odd crossing test).  With
    ``obstacle=True`` the fluid is outside the polygon.
    """

    def __init__(self, vertices, edge_labels, obstacle: bool = False, name: str | None = None):
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise DegenerateGeometry("polygon needs at least three 2D vertices")
        if len(edge_labels) != len(v):
            raise DegenerateGeometry("one label per polygon edge is required")
        # orient counter-clockwise so outward normals are (t_y, -t_x)
        area = 0.5 * np.sum(v[:, 0] * np.roll(v[:, 1], -1) - np.roll(v[:, 0], -1) * v[:, 1])
        if area == 0.0:
            raise DegenerateGeometry("polygon has zero area")
        labels = list(edge_labels)
        if area < 0:
            v = v[::-1].copy()
            # edge k of the reversed polygon is edge (n-2-k) mod n of the original
            labels = [labels[(len(v) - 2 - k) % len(v)] for k in range(len(v))]
        self.vertices = v
        self.obstacle = obstacle
        self.edge_labels = labels
        prefix = name or "poly"
        self._pieces = []
        for k in range(len(v)):
            a, b = v[k], v[(k + 1) % len(v)]
            t = (b - a) / np.linalg.norm(b - a)
            out = np.array([t[1], -t[0]])
            if obstacle:
                out = -out
            self._pieces.append(Segment(tuple(a), tuple(b), tuple(out), labels[k], f"{prefix}:{labels[k]}#{k}"))

    def _inside(self, p: np.ndarray) -> np.ndarray:
        x, y = p[:, 0], p[:, 1]
        inside = np.zeros(len(p), dtype=bool)
        v = self.vertices
        for k in range(len(v)):
            (x1, y1), (x2, y2) = v[k], v[(k + 1) % len(v)]
            crosses = (y1 > y) != (y2 > y)
            with np.errstate(divide="ignore", invalid="ignore"):
                xc = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            inside ^= crosses & (x < xc)
        return inside

    def _unsigned(self, p):
        dists = np.stack([pc.distance(p) for pc in self._pieces], axis=1)
        return dists, np.argmin(dists, axis=1)

    def sdf(self, p):
        p = _as_points(p)
        dists, k = self._unsigned(p)
        d = dists[np.arange(len(p)), k]
        sign = np.where(self._inside(p), -1.0, 1.0)
        return -sign * d if self.obstacle else sign * d

    def gradient(self, p):
        p = _as_points(p)
        dists, k = self._unsigned(p)
        g = np.empty_like(p)
        for i in range(len(p)):
            pc = self._pieces[k[i]]
            c = pc.closest(p[i : i + 1])[0]
            r = p[i] - c
            nr = np.linalg.norm(r)
            if nr < 1e-14:
                g[i] = pc.outward
            else:
                # exact distance: gradient is the unit vector away from the
                # closest point, oriented so that it points out of the fluid
                r = r / nr
                g[i] = r if r @ np.asarray(pc.outward) >= 0 else -r
        return g

    def pieces(self):
        return list(self._pieces)


class Intersection(Shape):
    def __init__(self, *shapes: Shape):
        self.shapes = shapes

    def sdf(self, p):
        return np.max(np.stack([s.sdf(p) for s in self.shapes]), axis=0)

    def gradient(self, p):
        p = _as_points(p)
        d = np.stack([s.sdf(p) for s in self.shapes])
        k = np.argmax(d, axis=0)
        grads = np.stack([s.gradient(p) for s in self.shapes])
        return grads[k, np.arange(len(p))]

    def pieces(self):
        return [pc for s in self.shapes for pc in s.pieces()]


class Union(Shape):
    def __init__(self, *shapes: Shape):
        self.shapes = shapes

    def sdf(self, p):
        return np.min(np.stack([s.sdf(p) for s in self.shapes]), axis=0)

    def gradient(self, p):
        p = _as_points(p)
        d = np.stack([s.sdf(p) for s in self.shapes])
        k = np.argmin(d, axis=0)
        grads = np.stack([s.gradient(p) for s in self.shapes])
        return grads[k, np.arange(len(p))]

    def pieces(self):
        return [pc for s in self.shapes for pc in s.pieces()]


def box(lo, hi, labels=("left", "right", "bottom", "top")) -> Polygon:
    """Axis-aligned box with fluid inside; labels ordered left/right/bottom/top."""
    (x0, y0), (x1, y1) = lo, hi
    left, right, bottom, top = labels
    return Polygon([(x0, y0), (x1, y0), (x1, y1), (x0, y1)], [bottom, right, top, left], name="box")


# ---------------------------------------------------------------------------
# 1D
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Interval:
    """1D fluid interval ``(x_l, x_r)``."""

    x_l: float
    x_r: float
    labels: tuple[str, str] = field(default=("left", "right"))

    def __post_init__(self):
        if not self.x_r > self.x_l:
            raise DegenerateGeometry("interval must satisfy x_l < x_r")

    def sdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        return np.maximum(self.x_l - x, x - self.x_r)

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        return np.where(self.x_l - x >= x - self.x_r, -1.0, 1.0)[:, None]

    def labels_set(self) -> set[str]:
        return set(self.labels)
