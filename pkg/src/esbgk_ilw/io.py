"""Moment output: per-node CSV tables and legacy ASCII VTK grids."""

from __future__ import annotations

import numpy as np

from .errors import IoError
from .moments import macro_arrays
from .phase_mesh import INTERIOR, PhaseMesh
from .scenarios import mach_number

MOMENT_COLUMNS = ("rho", "ux", "uy", "uz", "T", "p", "mach")


def moment_table(f: np.ndarray, mesh: PhaseMesh) -> dict[str, np.ndarray]:
    """Macroscopic fields on the interior nodes, keyed like the CSV columns."""
    rho, u, T, _ = macro_arrays(f[mesh.interior], mesh.vgrid)
    pts = mesh.active_points[mesh.interior]
    out = {"x": pts[:, 0]}
    if mesh.dim == 2:
        out["y"] = pts[:, 1]
    out.update(rho=rho, ux=u[:, 0], uy=u[:, 1], uz=u[:, 2], T=T, p=rho * T, mach=mach_number(u, T))
    return out


def write_moments_csv(f: np.ndarray, mesh: PhaseMesh, path) -> None:
    table = moment_table(f, mesh)
    cols = list(table)
    data = np.column_stack([table[c] for c in cols])
    try:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(",".join(cols) + "\n")
            for row in data:
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_moments_csv(path) -> dict[str, np.ndarray]:
    try:
        data = np.genfromtxt(path, delimiter=",", names=True)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    data = np.atleast_1d(data)
    return {name: np.asarray(data[name], dtype=float) for name in data.dtype.names}


def write_field_vtk(f: np.ndarray, mesh: PhaseMesh, path) -> None:
    """Moments on the full Cartesian grid with a ``blank`` scalar (1 interior, 0 elsewhere)."""
    grid = mesh.grid
    counts = tuple(grid.counts) + (1,) * (3 - grid.dim)
    origin = tuple(grid.origin) + (0.0,) * (3 - grid.dim)
    spacing = tuple(grid.spacing) + (1.0,) * (3 - grid.dim)
    labels = mesh.labeling.reshape(grid.counts)
    interior_flat = np.flatnonzero(labels.ravel() == INTERIOR)
    table = moment_table(f, mesh)
    # interior rows follow the grid's flat order, so they map straight onto interior_flat
    blank = (labels == INTERIOR).astype(np.int64)
    fields = {}
    for name in MOMENT_COLUMNS:
        full = np.zeros(grid.size)
        full[interior_flat] = table[name]
        fields[name] = full.reshape(grid.counts)
    npts = int(np.prod(counts))

    def ordered(a):
        # VTK runs x fastest; the grid arrays are indexed [ix, iy]
        return a.T.ravel() if a.ndim == 2 else a.ravel()

    lines = [
        "# vtk DataFile Version 3.0",
        f"{mesh.geometry.__class__.__name__} moments",
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        "DIMENSIONS {} {} {}".format(*counts),
        "ORIGIN {} {} {}".format(*(f"{v:.17g}" for v in origin)),
        "SPACING {} {} {}".format(*(f"{v:.17g}" for v in spacing)),
        f"POINT_DATA {npts}",
        "SCALARS blank int 1",
        "LOOKUP_TABLE default",
        *(str(v) for v in ordered(blank)),
    ]
    for name, arr in fields.items():
        lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        lines += [f"{v:.17g}" for v in ordered(arr)]
    try:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
