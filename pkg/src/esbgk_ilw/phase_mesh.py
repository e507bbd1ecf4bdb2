"""Cartesian phase-space mesh: spatial grid, velocity grid, point classes, ghosts.

The spatial grid is a uniform node lattice; the fluid domain is carved out of
it by a signed-distance geometry.  Nodes are Interior (d < 0), Ghost (d >= 0
but within two steps along an axis of an interior node) or Unused.  Only
Interior and Ghost nodes ("active" nodes) carry distribution values.

The velocity grid is a uniform tensor grid, optionally stored modulo a
symmetry group to cut the work of problems whose solution is known to be
symmetric (e.g. 1D problems are invariant under rotations about v_x).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import sparse

from .errors import BoundaryTooCloseToBox, DegenerateGeometry, ProjectionDiverged
from .geometry import Interval

UNUSED, INTERIOR, GHOST = 0, 1, 2

# ---------------------------------------------------------------------------
# spatial grid
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform node lattice; ``counts`` is the number of nodes per axis."""

    dim: int
    origin: tuple[float, ...]
    spacing: tuple[float, ...]
    counts: tuple[int, ...]

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError("dim must be 1 or 2")
        if not (len(self.origin) == len(self.spacing) == len(self.counts) == self.dim):
            raise ValueError("origin, spacing and counts must have one entry per axis")
        if any(h <= 0 for h in self.spacing):
            raise ValueError("spacing must be positive")
        if any(n < 5 for n in self.counts):
            raise ValueError("each axis needs at least 5 nodes")

    @classmethod
    def uniform(cls, lo, hi, intervals) -> SpatialGrid:
        """Grid with ``intervals`` cells per axis spanning ``[lo, hi]`` (nodes on both ends)."""
        lo, hi, intervals = np.atleast_1d(lo), np.atleast_1d(hi), np.atleast_1d(intervals)
        spacing = tuple(float((b - a) / n) for a, b, n in zip(lo, hi, intervals))
        return cls(len(lo), tuple(float(a) for a in lo), spacing, tuple(int(n) + 1 for n in intervals))

    @property
    def size(self) -> int:
        return int(np.prod(self.counts))

    def axis(self, k: int) -> np.ndarray:
        return self.origin[k] + self.spacing[k] * np.arange(self.counts[k])

    @cached_property
    def points(self) -> np.ndarray:
        """Node coordinates, shape ``(size, dim)``, C order (last axis fastest)."""
        mesh = np.meshgrid(*[self.axis(k) for k in range(self.dim)], indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def flat(self, index) -> int:
        return int(np.ravel_multi_index(tuple(index), self.counts))

    def unflat(self, k: int) -> tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(k, self.counts))

    @property
    def h(self) -> float:
        return min(self.spacing)


# ---------------------------------------------------------------------------
# velocity grid
# ---------------------------------------------------------------------------


def _axis_nodes(vmax: float, count: int) -> np.ndarray:
    """Symmetric nodes: odd counts include 0 (step vmax/n), even counts are cell centres."""
    if count < 2:
        raise ValueError("need at least two velocity nodes per axis")
    if count % 2:
        n = count // 2
        return np.arange(-n, n + 1) * (vmax / n)
    dv = 2.0 * vmax / count
    return -vmax + dv * (np.arange(count) + 0.5)


_BASIS_NAMES = ("1", "vx", "vy", "vz", "vxx", "vyy", "vzz", "vxy", "vxz", "vyz")


def _basis(v: np.ndarray) -> np.ndarray:
    vx, vy, vz = v[:, 0], v[:, 1], v[:, 2]
    return np.stack([np.ones_like(vx), vx, vy, vz, vx * vx, vy * vy, vz * vz, vx * vy, vx * vz, vy * vz], axis=1)


class VelocityGrid:
    """Uniform 3D velocity grid, optionally reduced by a symmetry group.

    Args:
        vmax: half-width of the velocity box, scalar or one per axis.
        counts: nodes per axis (scalar or 3 values).  Odd counts give nodes
            ``j*dv`` with ``dv = vmax/(count//2)``; even counts give cell
            centres with ``dv = 2*vmax/count``.
        symmetry: ``"none"``, ``"z"`` (identify ``v_z`` with ``-v_z``) or
            ``"yz"`` (identify velocities related by a rotation about the
            ``v_x`` axis by multiples of 90 degrees and by the reflections of
            the ``(v_y, v_z)`` square).  Values are stored once per orbit;
            ``weights`` carry the orbit size.
    """

    def __init__(self, vmax, counts, symmetry: str = "none"):
        vmax = np.broadcast_to(np.asarray(vmax, dtype=float), (3,))
        counts = np.broadcast_to(np.asarray(counts, dtype=int), (3,))
        if np.any(vmax <= 0):
            raise ValueError("velocity half-width must be positive")
        if symmetry not in ("none", "z", "yz"):
            raise ValueError(f"unknown velocity symmetry {symmetry!r}")
        if symmetry == "yz" and (vmax[1] != vmax[2] or counts[1] != counts[2]):
            raise ValueError("'yz' symmetry needs identical y and z axes")
        self.vmax = tuple(float(a) for a in vmax)
        self.counts = tuple(int(c) for c in counts)
        self.symmetry = symmetry
        self.axes = tuple(_axis_nodes(a, c) for a, c in zip(self.vmax, self.counts))
        self.dv = tuple(float(ax[1] - ax[0]) for ax in self.axes)
        self.cell = float(np.prod(self.dv))

        mesh = np.meshgrid(*self.axes, indexing="ij")
        self.full_v = np.stack([m.ravel() for m in mesh], axis=1)
        idx = np.stack([m.ravel() for m in np.meshgrid(*[np.arange(c) for c in self.counts], indexing="ij")], axis=1)
        self._full_idx = idx
        self.full_to_rep, rep_full, mult = self._reduce(idx)
        self.rep_full = rep_full
        self.v = self.full_v[rep_full]
        self.multiplicity = mult.astype(float)
        self.weights = self.cell * self.multiplicity
        # orbit-averaged moment basis: sum_j weights_j f_j basis_j equals the
        # full-grid integral of the basis functions against the symmetric f
        basis_full = _basis(self.full_v)
        acc = np.zeros((len(rep_full), 10))
        np.add.at(acc, self.full_to_rep, basis_full)
        self.basis = acc / mult[:, None]

    @classmethod
    def from_half_count(cls, vmax: float, nv: int, symmetry: str = "none") -> VelocityGrid:
        """Grid with ``2*nv + 1`` nodes per axis, ``v_j = j*vmax/nv``."""
        return cls(vmax, 2 * nv + 1, symmetry)

    def _reduce(self, idx: np.ndarray):
        c = self.counts
        iy = idx[:, 1] - (c[1] - 1) / 2.0
        iz = idx[:, 2] - (c[2] - 1) / 2.0
        if self.symmetry == "none":
            key_y, key_z = idx[:, 1], idx[:, 2]
        elif self.symmetry == "z":
            key_y, key_z = idx[:, 1], np.abs(iz)
        else:
            a, b = np.abs(iy), np.abs(iz)
            key_y, key_z = np.maximum(a, b), np.minimum(a, b)
        keys = np.stack([idx[:, 0].astype(float), np.asarray(key_y, float), np.asarray(key_z, float)], axis=1)
        uniq, first, inverse, mult = np.unique(keys, axis=0, return_index=True, return_inverse=True, return_counts=True)
        inverse = inverse.ravel().astype(np.int64)
        # representative: last member in grid order, i.e. v_y >= v_z >= 0
        rep_full = np.zeros(len(uniq), dtype=np.int64)
        np.maximum.at(rep_full, inverse, np.arange(len(idx)))
        return inverse, rep_full, mult

    @property
    def size(self) -> int:
        return len(self.v)

    @property
    def full_size(self) -> int:
        return len(self.full_v)

    @property
    def speed_max(self) -> tuple[float, float, float]:
        return tuple(float(np.max(np.abs(ax))) for ax in self.axes)

    def expand(self, f: np.ndarray) -> np.ndarray:
        """Values on the full tensor grid (last axis of ``f`` is velocity)."""
        return f[..., self.full_to_rep]

    def restrict(self, f_full: np.ndarray) -> np.ndarray:
        """Representative values of a full-grid array (no averaging)."""
        return f_full[..., self.rep_full]

    def integrate(self, f: np.ndarray, phi: np.ndarray | None = None) -> np.ndarray:
        """Quadrature ``sum_j w_j phi_j f_j`` over the last axis."""
        w = self.weights if phi is None else self.weights * phi
        return f @ w

    def reflect_x(self) -> np.ndarray:
        """Index map ``j -> j*`` with ``v_x -> -v_x`` (exact node mapping)."""
        c = self.counts
        i = self._full_idx[self.rep_full]
        j = np.stack([c[0] - 1 - i[:, 0], i[:, 1], i[:, 2]], axis=1)
        return self.full_to_rep[np.ravel_multi_index(j.T, c)]

    def reflect_y(self) -> np.ndarray:
        c = self.counts
        i = self._full_idx[self.rep_full]
        j = np.stack([i[:, 0], c[1] - 1 - i[:, 1], i[:, 2]], axis=1)
        return self.full_to_rep[np.ravel_multi_index(j.T, c)]

    def interpolation_matrix(self, points: np.ndarray) -> sparse.csr_matrix:
        """Trilinear interpolation from stored values to arbitrary velocities.

        Points outside the node box get zero weight.  Returns a
        ``(len(points), size)`` matrix acting on representative values.
        """
        points = np.asarray(points, dtype=float)
        rows, cols, vals = [], [], []
        frac_idx = []
        for k in range(3):
            s = (points[:, k] - self.axes[k][0]) / self.dv[k]
            frac_idx.append(s)
        s = np.stack(frac_idx, axis=1)
        inside = np.all((s >= -1e-12) & (s <= np.asarray(self.counts) - 1 + 1e-12), axis=1)
        s = np.clip(s, 0, np.asarray(self.counts) - 1)
        base = np.minimum(np.floor(s).astype(int), np.asarray(self.counts) - 2)
        t = s - base
        pidx = np.arange(len(points))
        for cx in (0, 1):
            for cy in (0, 1):
                for cz in (0, 1):
                    w = (
                        (t[:, 0] if cx else 1 - t[:, 0])
                        * (t[:, 1] if cy else 1 - t[:, 1])
                        * (t[:, 2] if cz else 1 - t[:, 2])
                    )
                    node = np.ravel_multi_index((base[:, 0] + cx, base[:, 1] + cy, base[:, 2] + cz), self.counts)
                    keep = inside & (w != 0.0)
                    rows.append(pidx[keep])
                    cols.append(self.full_to_rep[node[keep]])
                    vals.append(w[keep])
        m = sparse.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(len(points), self.size)
        )
        return m.tocsr()


# ---------------------------------------------------------------------------
# classification and ghost points
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GhostPoint:
    """One ghost node and the boundary data attached to it.

    ``normal`` is the inward unit normal at the foot ``foot``; ``distance`` is
    ``|x_g - x_p|``.  ``piece_id`` identifies the geometric piece (edge) the
    foot lies on, ``label`` the wall condition bound to it.
    """

    index: tuple[int, ...]
    node: int
    position: np.ndarray
    foot: np.ndarray
    normal: np.ndarray
    distance: float
    label: str
    piece_id: str
    corner: bool = False

    @property
    def theta(self) -> float:
        if len(self.normal) == 1:
            return 0.0 if self.normal[0] > 0 else math.pi
        return math.atan2(self.normal[1], self.normal[0])


def _sdf(geometry, points: np.ndarray) -> np.ndarray:
    if isinstance(geometry, Interval):
        return geometry.sdf(points[:, 0])
    return geometry.sdf(points)


def classify_points(geometry, grid: SpatialGrid) -> np.ndarray:
    """Label every node UNUSED / INTERIOR / GHOST; returns an int8 array of shape ``counts``."""
    d = _sdf(geometry, grid.points).reshape(grid.counts)
    interior = d < 0
    if not interior.any():
        raise DegenerateGeometry("no interior node: geometry misses the grid")
    near = np.zeros_like(interior)
    for ax in range(grid.dim):
        for s in (-2, -1, 1, 2):
            near |= _shift(interior, ax, s)
    # an interior node whose two-step stencil would leave the grid
    for ax in range(grid.dim):
        lo = np.take(interior, [0, 1], axis=ax)
        hi = np.take(interior, [-2, -1], axis=ax)
        if lo.any() or hi.any():
            raise BoundaryTooCloseToBox("ghost layer would leave the grid; enlarge the computational box")
    labels = np.full(grid.counts, UNUSED, dtype=np.int8)
    labels[interior] = INTERIOR
    labels[~interior & near] = GHOST
    return labels


def _shift(a: np.ndarray, axis: int, s: int) -> np.ndarray:
    """``out[i] = a[i + s]`` along ``axis`` with False padding."""
    out = np.zeros_like(a)
    n = a.shape[axis]
    src = [slice(None)] * a.ndim
    dst = [slice(None)] * a.ndim
    if s > 0:
        src[axis], dst[axis] = slice(s, n), slice(0, n - s)
    else:
        src[axis], dst[axis] = slice(0, n + s), slice(-s, n)
    out[tuple(dst)] = a[tuple(src)]
    return out


def boundary_foot(index, geometry, grid: SpatialGrid) -> GhostPoint:
    """Closest boundary point, inward normal and wall label for a ghost node."""
    index = tuple(int(i) for i in np.atleast_1d(index))
    x_g = grid.points[grid.flat(index)]
    node = grid.flat(index)
    if isinstance(geometry, Interval):
        left = abs(x_g[0] - geometry.x_l) <= abs(x_g[0] - geometry.x_r)
        xp = geometry.x_l if left else geometry.x_r
        n = np.array([1.0 if left else -1.0])
        label = geometry.labels[0 if left else 1]
        return GhostPoint(index, node, x_g.copy(), np.array([xp]), n, abs(x_g[0] - xp), label, label)

    h = grid.h
    x = x_g.copy()
    for _ in range(50):
        d = float(geometry.sdf(x)[0])
        if abs(d) <= 1e-12 * h:
            break
        g = geometry.gradient(x)[0]
        x = x - d * g / (g @ g)
    d = float(geometry.sdf(x)[0])
    if not abs(d) <= 1e-10 * h:
        raise ProjectionDiverged(f"closest-point iteration did not converge for ghost {index}")
    r = x - x_g
    dist = float(np.linalg.norm(r))
    pieces = geometry.pieces()
    pd = np.array([pc.distance(x[None, :])[0] for pc in pieces])
    cand = np.flatnonzero(pd <= 1e-9 * h)
    if len(cand) == 0:
        cand = np.array([int(np.argmin(pd))])
    if dist > 1e-12 * h:
        n = r / dist
    else:
        n = -np.asarray(pieces[cand[0]].outward_normal(x[None, :])[0])
    if len(cand) > 1:
        # corner foot: pick the piece whose outward normal best matches x_g - x_p
        align = [pieces[k].outward_normal(x[None, :])[0] @ (-n) for k in cand]
        k = int(cand[int(np.argmax(align))])
    else:
        k = int(cand[0])
    return GhostPoint(index, node, x_g.copy(), x, n, dist, pieces[k].label, pieces[k].piece_id, corner=len(cand) > 1)


# ---------------------------------------------------------------------------
# phase mesh
# ---------------------------------------------------------------------------


@dataclass
class PhaseMesh:
    """Spatial grid, velocity grid, geometry, point classes and ghost registry.

    Distribution arrays carried by the solver have shape ``(n_active, Nv)``
    where the active nodes are the Interior and Ghost nodes in grid order.
    """

    grid: SpatialGrid
    vgrid: VelocityGrid
    geometry: object
    labeling: np.ndarray = field(init=False)
    active: np.ndarray = field(init=False)
    grid_to_active: np.ndarray = field(init=False)
    interior: np.ndarray = field(init=False)
    ghosts: list = field(init=False)
    ghost_active: np.ndarray = field(init=False)
    neighbors: np.ndarray = field(init=False)

    def __post_init__(self):
        grid = self.grid
        self.labeling = classify_points(self.geometry, grid)
        flat = self.labeling.ravel()
        self.active = np.flatnonzero(flat != UNUSED)
        self.grid_to_active = np.full(grid.size, -1, dtype=np.int64)
        self.grid_to_active[self.active] = np.arange(len(self.active))
        self.interior = self.grid_to_active[np.flatnonzero(flat == INTERIOR)]
        ghost_nodes = np.flatnonzero(flat == GHOST)
        self.ghosts = [boundary_foot(grid.unflat(k), self.geometry, grid) for k in ghost_nodes]
        self.ghost_active = self.grid_to_active[ghost_nodes]
        self.neighbors = self._neighbor_table()

    def _neighbor_table(self) -> np.ndarray:
        """Active indices of the +-1, +-2 neighbours per axis for interior nodes.

        Columns: ``[x-1, x-2, x+1, x+2, y-1, y-2, y+1, y+2]`` (y columns are -1 in 1D).
        """
        grid = self.grid
        nb = np.full((len(self.interior), 8), -1, dtype=np.int64)
        idx = np.stack(np.unravel_index(self.active[self.interior], grid.counts), axis=1)
        for ax in range(grid.dim):
            for c, s in enumerate((-1, -2, 1, 2)):
                j = idx.copy()
                j[:, ax] += s
                a = self.grid_to_active[np.ravel_multi_index(j.T, grid.counts)]
                if np.any(a < 0):
                    raise DegenerateGeometry("an interior stencil reads an unused node")
                nb[:, 4 * ax + c] = a
        return nb

    # -- convenience -------------------------------------------------------

    @property
    def dim(self) -> int:
        return self.grid.dim

    @property
    def n_active(self) -> int:
        return len(self.active)

    @cached_property
    def active_points(self) -> np.ndarray:
        return self.grid.points[self.active]

    @cached_property
    def is_interior(self) -> np.ndarray:
        m = np.zeros(self.n_active, dtype=bool)
        m[self.interior] = True
        return m

    @cached_property
    def cell_volumes(self) -> np.ndarray:
        """Quadrature weights over interior nodes for spatial integrals.

        In 1D the end cells are trimmed to the physical wall, which makes the
        total mass quadrature consistent to second order for off-node walls.
        """
        vol = np.full(len(self.interior), float(np.prod(self.grid.spacing)))
        if self.dim == 1:
            g = self.geometry
            h = self.grid.spacing[0]
            x = self.active_points[self.interior, 0]
            vol[0] = (x[0] - g.x_l) + 0.5 * h
            vol[-1] = (g.x_r - x[-1]) + 0.5 * h
        return vol

    def ghosts_by_label(self) -> dict[str, list[int]]:
        out: dict[str, list[int]] = {}
        for k, gp in enumerate(self.ghosts):
            out.setdefault(gp.label, []).append(k)
        return out

    def boundary_labels(self) -> set[str]:
        if isinstance(self.geometry, Interval):
            return set(self.geometry.labels)
        return self.geometry.labels()
