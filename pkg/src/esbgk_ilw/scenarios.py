"""The four reference experiments, a convergence harness and Knudsen-layer diagnostics.

``build_scenario(name, overrides)`` returns a fully specified ``Scenario``.
Overrides use the configuration key names (``nx``, ``ny``, ``nv``, ``vmax``,
``epsilon``, ``nu``, ``tau_prefactor``, ``tau_omega``, ``dt``, ``cfl``,
``t_end``, ``walls``, ...); anything a scenario does not understand is an error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable

import numpy as np

from .boundary_ilw import Absorbing, Diffuse, Inflow, Maxwell, Specular
from .collision import RelaxationModel
from .errors import NonNestedLadder, NotSteady, UnknownScenario
from .geometry import Intersection, Interval, Polygon, box
from .imex_stepper import RunResult, StepConfig, Stepper, run
from .moments import macro_arrays, maxwellian
from .phase_mesh import PhaseMesh, SpatialGrid, VelocityGrid

GAMMA = 1.4
STEADY_TOL = 1e-6
SPECULAR_CFL = 0.3


@dataclass
class Scenario:
    """A ready-to-run experiment.  ``initial()`` builds ``f`` at t = 0."""

    name: str
    mesh: PhaseMesh
    wallspecs: dict
    cfg: StepConfig
    initial: Callable[[], np.ndarray]
    params: dict
    steady_tol: float | None = None
    diagnostics: tuple[str, ...] = ()

    def solve(self, observers=(), ilw: bool = True, keep_records: bool = True, state_observers=(), stop=None) -> RunResult:
        stepper = Stepper(self.mesh, self.wallspecs, self.cfg, ilw=ilw)
        return run(
            self.initial(),
            self.mesh,
            self.wallspecs,
            self.cfg,
            observers=observers,
            steady_tol=self.steady_tol,
            stepper=stepper,
            keep_records=keep_records,
            state_observers=state_observers,
            stop=stop,
        )


# ---------------------------------------------------------------------------
# defaults
# ---------------------------------------------------------------------------

COMMON = {"epsilon": 1.0, "nu": -0.5, "tau_prefactor": 1.0, "tau_omega": 1.0, "dt": None, "cfl": None}

DEFAULTS = {
    "smooth_1d": {**COMMON, "nx": 64, "nv": 12, "vmax": 8.0, "t_end": 1.0, "cfl": 0.5, "walls": {"left": 1.0, "right": 1.0}},
    "temp_gradient_1d": {
        **COMMON,
        "epsilon": 0.1,
        "nx": 100,
        "nv": 12,
        "vmax": 8.0,
        "t_end": None,
        "dt": 0.001,
        "cfl": 0.5,
        "walls": {"left": 1.1, "right": 0.9},
    },
    "trapezoid_2d": {
        **COMMON,
        "epsilon": 5.0,
        "nx": 96,
        "ny": 48,
        "nv": (64, 48, 12),
        "vmax": (12.0, 8.0, 8.0),
        "t_end": 6.0,
        "cfl": SPECULAR_CFL,
        "mach_in": 5.0,
        "walls": {"top": 1.05},
    },
    "airfoil_2d": {
        **COMMON,
        "epsilon": 0.05,
        "nx": 150,
        "ny": 100,
        "nv": (48, 48, 12),
        "vmax": 8.0,
        "t_end": 4.0,
        "cfl": SPECULAR_CFL,
        "mach_in": 1.2,
        "walls": {"airfoil": 1.05},
    },
}

ALIASES = {"knudsen": "epsilon"}

DESCRIPTIONS = {
    "smooth_1d": "1D cosine density perturbation between diffuse walls (convergence test)",
    "temp_gradient_1d": "1D gas between walls at different temperatures (Knudsen layer)",
    "trapezoid_2d": "2D supersonic inflow through a trapezoidal channel",
    "airfoil_2d": "2D transonic flow over a half airfoil",
}


def scenario_names() -> list[str]:
    return list(DEFAULTS)


def resolve_parameters(name: str, overrides: dict | None = None) -> dict:
    """Defaults of ``name`` updated by ``overrides``, with ``t_end`` and ``dt | cfl`` settled."""
    if name not in DEFAULTS:
        raise UnknownScenario(f"unknown scenario {name!r}; known: {', '.join(DEFAULTS)}")
    p = {k: (dict(v) if isinstance(v, dict) else v) for k, v in DEFAULTS[name].items()}
    given = set()
    for key, val in (overrides or {}).items():
        key = ALIASES.get(key, key)
        if key not in p:
            raise ValueError(f"scenario {name!r} has no parameter {key!r}")
        given.add(key)
        if key == "walls":
            p["walls"].update(val)
        else:
            p[key] = val
    # an explicit dt or cfl replaces the other one from the defaults; with both the smaller step wins
    if "cfl" in given and "dt" not in given:
        p["dt"] = None
    elif "dt" in given and "cfl" not in given:
        p["cfl"] = None
    if p["t_end"] is None:
        # steady state is reached on a diffusive time scale ~ 1/eps; runs stop early once steady
        p["t_end"] = 2.5 / p["epsilon"]
    return p


def _model(p) -> RelaxationModel:
    return RelaxationModel("ESBGK", p["nu"], p["tau_prefactor"], p["tau_omega"])


def _wall(value, default):
    """A wall entry is either a temperature or a ready WallSpec."""
    if isinstance(value, (Maxwell, Inflow, Absorbing)):
        return value
    return default(float(value))


def _interval_mesh(nx: int, nv, vmax) -> PhaseMesh:
    # I0 = [-pi/6, pi/6] with nx intervals, padded by two nodes per side
    h = (math.pi / 3) / nx
    grid = SpatialGrid(1, (-math.pi / 6 - 2 * h,), (h,), (nx + 5,))
    return PhaseMesh(grid, VelocityGrid.from_half_count(vmax, nv, "yz"), Interval(-0.5, 0.5))


def _velocity_2d(nv, vmax) -> VelocityGrid:
    counts = (nv, nv, nv) if np.isscalar(nv) else tuple(nv)
    return VelocityGrid(vmax, counts, "z")


def _cfg(p) -> StepConfig:
    return StepConfig(eps=p["epsilon"], t_end=p["t_end"], model=_model(p), dt=p["dt"], cfl=p["cfl"])


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------


def _smooth_1d(p) -> Scenario:
    mesh = _interval_mesh(p["nx"], p["nv"], p["vmax"])
    walls = {k: _wall(p["walls"][k], Diffuse) for k in ("left", "right")}
    M = maxwellian(1.0, (0, 0, 0), 1.0, mesh.vgrid)
    x = mesh.active_points[:, 0]

    def initial():
        return (1.0 + 0.1 * np.cos(2 * np.pi * x))[:, None] * M[None, :]

    return Scenario("smooth_1d", mesh, walls, _cfg(p), initial, p, None, ("moments",))


def _temp_gradient_1d(p) -> Scenario:
    mesh = _interval_mesh(p["nx"], p["nv"], p["vmax"])
    walls = {k: _wall(p["walls"][k], Diffuse) for k in ("left", "right")}
    M = maxwellian(1.0, (0, 0, 0), 1.0, mesh.vgrid)

    def initial():
        return np.tile(M, (mesh.n_active, 1))

    return Scenario("temp_gradient_1d", mesh, walls, _cfg(p), initial, p, STEADY_TOL, ("moments", "knudsen_layer"))


def trapezoid_geometry(a=2.0, b=0.4, slope=0.2) -> Polygon:
    return Polygon([(0, 0), (a, 0), (a, b + slope * a), (0, b)], ["bottom", "right", "top", "left"], name="trapezoid")


def _inflow_state(p) -> Inflow:
    u = p["mach_in"] * math.sqrt(GAMMA * 1.0)
    return Inflow(1.0, (u, 0.0, 0.0), 1.0)


def _uniform_inflow(mesh, inflow: Inflow):
    M = maxwellian(inflow.rho, inflow.u, inflow.T, mesh.vgrid)
    return lambda: np.tile(M, (mesh.n_active, 1))


def _trapezoid_2d(p) -> Scenario:
    a, top = 2.0, 0.4 + 0.2 * 2.0
    nx, ny = p["nx"], p["ny"]
    # 2.3 cells of margin on each side keep the walls off-node and leave room for two ghost layers
    dx = a / (nx - 4.6)
    dy = dx if (ny - 4.6) * dx >= top else top / (ny - 4.6)
    grid = SpatialGrid(2, (-2.3 * dx, -2.3 * dy), (dx, dy), (nx + 1, ny + 1))
    mesh = PhaseMesh(grid, _velocity_2d(p["nv"], p["vmax"]), trapezoid_geometry())
    inflow = _inflow_state(p)
    walls = {
        "left": inflow,
        "bottom": Specular(),
        "right": Absorbing(),
        "top": _wall(p["walls"]["top"], Diffuse),
    }
    return Scenario("trapezoid_2d", mesh, walls, _cfg(p), _uniform_inflow(mesh, inflow), p, STEADY_TOL, ("moments",))


def load_airfoil() -> np.ndarray:
    """Upper surface ``(x, y)`` of the bundled half profile, leading edge first."""
    with resources.files("esbgk_ilw").joinpath("data/airfoil.dat").open() as fh:
        return np.loadtxt(fh)


AIRFOIL_BOX = ((-0.5, 0.0), (1.5, 4.0 / 3.0))


def airfoil_geometry():
    prof = load_airfoil()
    # close the profile below the symmetry axis so the obstacle overlaps it cleanly
    verts = [tuple(q) for q in prof[::-1]] + [(0.0, -0.1), (1.0, -0.1)]
    labels = ["airfoil"] * (len(prof) - 1) + ["closure"] * 3
    body = Polygon(verts, labels, obstacle=True, name="airfoil")
    return Intersection(box(*AIRFOIL_BOX), body)


def _airfoil_2d(p) -> Scenario:
    (x0, y0), (x1, y1) = AIRFOIL_BOX
    nx, ny = p["nx"], p["ny"]
    dx = (x1 - x0) / (nx - 4.6)
    dy = (y1 - y0) / (ny - 4.6)
    grid = SpatialGrid(2, (x0 - 2.3 * dx, y0 - 2.3 * dy), (dx, dy), (nx + 1, ny + 1))
    mesh = PhaseMesh(grid, _velocity_2d(p["nv"], p["vmax"]), airfoil_geometry())
    inflow = _inflow_state(p)
    walls = {
        "left": inflow,
        "top": inflow,
        "right": Absorbing(),
        "bottom": Specular(),
        "airfoil": _wall(p["walls"]["airfoil"], Diffuse),
        "closure": Specular(),
    }
    return Scenario("airfoil_2d", mesh, walls, _cfg(p), _uniform_inflow(mesh, inflow), p, STEADY_TOL, ("moments",))


BUILDERS = {
    "smooth_1d": _smooth_1d,
    "temp_gradient_1d": _temp_gradient_1d,
    "trapezoid_2d": _trapezoid_2d,
    "airfoil_2d": _airfoil_2d,
}


def build_scenario(name: str, overrides: dict | None = None) -> Scenario:
    """Fully specified scenario.  Wall overrides may be temperatures or ready wall specs."""
    if name not in BUILDERS:
        raise UnknownScenario(f"unknown scenario {name!r}; known: {', '.join(BUILDERS)}")
    p = resolve_parameters(name, overrides)
    sc = BUILDERS[name](p)
    for label, val in p["walls"].items():
        if label not in sc.wallspecs:
            raise ValueError(f"scenario {name!r} has no wall {label!r}")
        if isinstance(val, (Maxwell, Inflow, Absorbing)):
            sc.wallspecs[label] = val
    return sc


# ---------------------------------------------------------------------------
# convergence
# ---------------------------------------------------------------------------


@dataclass
class ConvergenceReport:
    ladder: list[int]
    errors: list[float]  # e_{2h} between consecutive levels
    boundary_errors: list[float]
    orders: list[float] = field(default_factory=list)
    boundary_orders: list[float] = field(default_factory=list)
    dt: float = 0.0
    results: list = field(default_factory=list, repr=False)


def _orders(errs):
    return [math.log2(a / b) if a > 0 and b > 0 else math.nan for a, b in zip(errs, errs[1:])]


def coincident_nodes(coarse: PhaseMesh, fine: PhaseMesh):
    """Interior rows of ``coarse`` and the interior rows of ``fine`` at the same points."""
    pc = coarse.active_points[coarse.interior]
    pf = fine.active_points[fine.interior]
    hf = np.asarray(fine.grid.spacing)
    idx = np.rint((pc - np.asarray(fine.grid.origin)) / hf).astype(np.int64)
    ok = np.all(np.abs(idx * hf + np.asarray(fine.grid.origin) - pc) <= 1e-9 * hf, axis=1)
    flat = np.ravel_multi_index(idx.T, fine.grid.counts)
    act = fine.grid_to_active[flat]
    pos = np.full(fine.n_active, -1)
    pos[fine.interior] = np.arange(len(fine.interior))
    rows_f = np.where(act >= 0, pos[np.maximum(act, 0)], -1)
    keep = ok & (rows_f >= 0)
    return np.flatnonzero(keep), rows_f[keep]


def relative_l1(fc, ff, weights, cell: float) -> float:
    num = float(np.sum(np.abs(fc - ff) @ weights)) * cell
    den = float(np.sum(np.abs(ff) @ weights)) * cell
    return num / den


def _boundary_rows(mesh: PhaseMesh, width: float) -> np.ndarray:
    pts = mesh.active_points[mesh.interior]
    if mesh.dim == 1:
        g = mesh.geometry
        d = np.minimum(pts[:, 0] - g.x_l, g.x_r - pts[:, 0])
    else:
        d = -mesh.geometry.sdf(pts)
    return d <= width


def convergence_study(name: str, ladder, overrides: dict | None = None, ilw: bool = True, dt: float | None = None):
    """Run ``name`` on each level of a nested factor-2 ladder with one shared ``dt``.

    Errors are relative L1 norms of ``f_h - f_2h`` on the nodes the two
    levels share; the boundary error restricts them to nodes within three
    coarse spacings of a wall.
    """
    ladder = [int(n) for n in ladder]
    if len(ladder) < 2 or any(b != 2 * a for a, b in zip(ladder, ladder[1:])):
        raise NonNestedLadder(f"ladder {ladder} is not a nested factor-2 sequence")
    overrides = dict(overrides or {})
    scen = [build_scenario(name, {**overrides, "nx": n, **({"ny": n // 2} if "ny" in DEFAULTS[name] else {})}) for n in ladder]
    if dt is None:
        finest = scen[-1]
        dt = finest.cfg.dt or finest.cfg.timestep(finest.mesh)
    results = []
    for s in scen:
        cfg = StepConfig(eps=s.cfg.eps, t_end=s.cfg.t_end, model=s.cfg.model, dt=dt)
        stepper = Stepper(s.mesh, s.wallspecs, cfg, ilw=ilw)
        results.append(run(s.initial(), s.mesh, s.wallspecs, cfg, stepper=stepper, keep_records=False))
    errs, berrs = [], []
    for (sc, rc), (sf, rf) in zip(zip(scen, results), zip(scen[1:], results[1:])):
        rows_c, rows_f = coincident_nodes(sc.mesh, sf.mesh)
        fc = rc.f[sc.mesh.interior][rows_c]
        ff = rf.f[sf.mesh.interior][rows_f]
        w = sc.mesh.vgrid.weights
        cell = float(np.prod(sc.mesh.grid.spacing))
        errs.append(relative_l1(fc, ff, w, cell))
        near = _boundary_rows(sc.mesh, 3 * max(sc.mesh.grid.spacing))[rows_c]
        berrs.append(relative_l1(fc[near], ff[near], w, cell))
    return ConvergenceReport(ladder, errs, berrs, _orders(errs), _orders(berrs), dt, results)


# ---------------------------------------------------------------------------
# 2D profiles
# ---------------------------------------------------------------------------


def mach_number(u: np.ndarray, T: np.ndarray) -> np.ndarray:
    return np.linalg.norm(u, axis=1) / np.sqrt(GAMMA * T)


def bottom_profile(f: np.ndarray, mesh: PhaseMesh) -> dict:
    """``x``, ``rho``, ``T`` and ``mach`` on the lowest interior node of every grid column."""
    pts = mesh.active_points[mesh.interior]
    col = np.rint((pts[:, 0] - mesh.grid.origin[0]) / mesh.grid.spacing[0]).astype(np.int64)
    order = np.lexsort((pts[:, 1], col))
    first = order[np.r_[True, col[order][1:] != col[order][:-1]]]
    rho, u, T, _ = macro_arrays(f[mesh.interior][first], mesh.vgrid)
    return {"x": pts[first, 0], "y": pts[first, 1], "rho": rho, "T": T, "mach": mach_number(u, T)}


# ---------------------------------------------------------------------------
# Knudsen layer
# ---------------------------------------------------------------------------


def pressure_profile(f: np.ndarray, mesh: PhaseMesh):
    """Interior ``x`` and ``p = rho T`` for a 1D field."""
    rho, _, T, _ = macro_arrays(f[mesh.interior], mesh.vgrid)
    return mesh.active_points[mesh.interior, 0], rho * T


def knudsen_layer_diagnostics(result: RunResult, mesh: PhaseMesh) -> dict:
    """Bulk pressure, layer magnitude and width at each wall of a steady 1D run."""
    if not result.steady:
        raise NotSteady("the run did not reach the steady-state threshold")
    x, p = pressure_profile(result.f, mesh)
    g = mesh.geometry
    L = g.x_r - g.x_l
    mid = (x > g.x_l + 0.25 * L) & (x < g.x_r - 0.25 * L)
    p_bulk = float(np.median(p[mid]))
    out = {}
    for label, wall, order in (("left", g.x_l, slice(None)), ("right", g.x_r, slice(None, None, -1))):
        xs, dev = x[order], np.abs(p[order] - p_bulk)
        dist = np.abs(xs - wall)
        side = dist < 0.25 * L
        mag = float(dev[side].max())
        width = float(dist[side][-1])
        half = 0.5 * mag
        for i in range(1, int(side.sum())):
            if dev[i] < half <= dev[i - 1]:
                s = (dev[i - 1] - half) / (dev[i - 1] - dev[i])
                width = float(dist[i - 1] + s * (dist[i] - dist[i - 1]))
                break
        out[label] = {"bulk_pressure": p_bulk, "magnitude": mag, "width": width}
    return out
