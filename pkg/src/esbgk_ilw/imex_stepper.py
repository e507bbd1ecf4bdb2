"""First-order IMEX time stepping solved explicitly through moments.

One step from ``f^n``:

* fill ghosts, then form the explicit predictor ``g = f^n - dt v.grad f^n``;
* its moments give ``rho, u, T`` at ``n+1`` (collisions conserve them);
* the stress tensor relaxes implicitly: ``Theta^{n+1} = a Theta_g + (1-a) T I``
  with ``a = eps / (eps + (1-nu) tau dt)``;
* ``f^{n+1} = b g + (1-b) G[f^{n+1}]`` with ``b = eps / (eps + tau dt)``.

Every division is by ``eps + c tau dt`` so the update is well posed for any
``eps > 0``.  The hot loop is a fused numba kernel; ``imex_step_reference``
builds the same update from the public numpy operators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _kernels
from .boundary_ilw import BoundaryPlan, BoundaryScratch, fill_all_ghosts
from .collision import RelaxationModel
from .errors import EmptyDensity, NonFiniteState, TensorNotSPD
from .moments import corrected_tensor, gaussian_batch, macro_arrays, raw_moments
from .phase_mesh import PhaseMesh
from .transport import transport_term


@dataclass(frozen=True)
class StepConfig:
    """Time-stepping parameters.  With both ``dt`` and ``cfl`` the smaller step is used."""

    eps: float
    t_end: float
    model: RelaxationModel = field(default_factory=RelaxationModel)
    dt: float | None = None
    cfl: float | None = None

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be > 0")
        if not self.t_end >= 0:
            raise ValueError("t_end must be >= 0")
        if self.dt is None and self.cfl is None:
            raise ValueError("either dt or cfl must be given")
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be > 0")

    def timestep(self, mesh: PhaseMesh) -> float:
        """``dt``, ``cfl``-limited step, or the smaller of the two when both are set."""
        from .transport import cfl_timestep

        if self.cfl is None:
            return float(self.dt)
        h = cfl_timestep(mesh, self.cfl)
        return h if self.dt is None else min(float(self.dt), h)


@dataclass
class StepRecord:
    """Diagnostics after one step."""

    step: int
    t: float
    dt: float
    mass: float
    momentum: np.ndarray
    energy: float
    max_f: float
    min_f: float
    change: float  # ||f^{n+1} - f^n||_1 / dt over interior nodes
    flux_net: np.ndarray | None = None
    flux_gross: np.ndarray | None = None


def integrals(f: np.ndarray, mesh: PhaseMesh):
    """Total mass, momentum and energy over the interior (spatial quadrature)."""
    m = raw_moments(f[mesh.interior], mesh.vgrid)
    vol = mesh.cell_volumes
    mass = float(vol @ m[:, 0])
    mom = vol @ m[:, 1:4]
    energy = 0.5 * float(vol @ (m[:, 4] + m[:, 5] + m[:, 6]))
    return mass, mom, energy


class Stepper:
    """Reusable stepping context: mesh, boundary plan and ghost scratch."""

    def __init__(self, mesh: PhaseMesh, wallspecs: dict, cfg: StepConfig, ilw: bool = True):
        self.mesh = mesh
        self.cfg = cfg
        self.plan = BoundaryPlan(mesh, wallspecs)
        self.scratch = BoundaryScratch()
        self.ilw = ilw
        vg = mesh.vgrid
        self._W = np.ascontiguousarray(vg.weights[:, None] * vg.basis)
        self._v = np.ascontiguousarray(vg.v)
        self._interior = np.ascontiguousarray(mesh.interior)
        self._nb = np.ascontiguousarray(mesh.neighbors)
        sp = mesh.grid.spacing
        self._dx = sp[0]
        self._dy = sp[1] if mesh.dim == 2 else 1.0

    def fill_ghosts(self, f: np.ndarray, t: float) -> None:
        model = self.cfg.model
        fill_all_ghosts(f, self.plan, model, self.cfg.eps, t, self.scratch, ilw=self.ilw)

    def step(self, f: np.ndarray, t: float, dt: float, step_index: int = 0) -> np.ndarray:
        """Advance ``f`` (active-node array, ghosts refreshed in place) by ``dt``."""
        self.fill_ghosts(f, t)
        out = f.copy()
        model = self.cfg.model
        status, node = _kernels.imex_update(
            f,
            out,
            self._interior,
            self._nb,
            self._v,
            self._W,
            self.mesh.dim,
            self._dx,
            self._dy,
            dt,
            self.cfg.eps,
            model.effective_nu,
            model.c_tau,
            model.omega,
            model.kind == "ESBGK",
        )
        if status != _kernels.OK:
            where = self.mesh.grid.unflat(int(self.mesh.active[self._interior[node]]))
            msg = f"step {step_index} (t={t:.6g}) at node {where}"
            if status == _kernels.EMPTY:
                raise EmptyDensity(f"empty density at {msg}")
            if status == _kernels.NOT_SPD:
                raise TensorNotSPD(f"corrected tensor not positive definite at {msg}")
            raise NonFiniteState(f"non-finite state at {msg}", step=step_index, time=t, node=where)
        return out


def imex_step(f: np.ndarray, mesh: PhaseMesh, wallspecs: dict, cfg: StepConfig, t: float = 0.0, stepper=None):
    """One IMEX step; returns ``f^{n+1}`` (ghost rows of ``f`` are refreshed in place)."""
    stepper = stepper or Stepper(mesh, wallspecs, cfg)
    return stepper.step(f, t, cfg.timestep(mesh))


def imex_update_reference(f: np.ndarray, mesh: PhaseMesh, dt: float, eps: float, model: RelaxationModel):
    """Interior update from the public numpy operators (ghosts must be filled).

    Returns ``(f_new, info)`` where ``info`` holds the bootstrap moments
    (``rho``, ``u``, ``T``, ``theta``) and the Gaussian ``G``.
    """
    vg = mesh.vgrid
    g = f[mesh.interior] - dt * transport_term(f, mesh)
    rho, u, T, theta_g = macro_arrays(g, vg)
    tau = model.c_tau * rho * T ** (1.0 - model.omega)
    nu = model.effective_nu
    a = eps / (eps + (1.0 - nu) * tau * dt)
    theta = a[:, None, None] * theta_g + (1.0 - a)[:, None, None] * T[:, None, None] * np.eye(3)
    G = gaussian_batch(rho, u, corrected_tensor(T, theta, nu), vg.v)
    b = (eps / (eps + tau * dt))[:, None]
    out = f.copy()
    out[mesh.interior] = b * g + (1.0 - b) * G
    return out, {"rho": rho, "u": u, "T": T, "theta": theta, "G": G, "tau": tau}


def imex_step_reference(f, mesh, wallspecs, cfg: StepConfig, t: float = 0.0, stepper=None):
    stepper = stepper or Stepper(mesh, wallspecs, cfg)
    stepper.fill_ghosts(f, t)
    return imex_update_reference(f, mesh, cfg.timestep(mesh), cfg.eps, cfg.model)[0]


@dataclass
class RunResult:
    f: np.ndarray
    t: float
    steps: int
    records: list
    steady: bool = False


def step_times(t_end: float, dt: float) -> list[float]:
    """Step sizes reaching ``t_end``; the last one is shortened to land on it."""
    if t_end <= 0:
        return []
    n = max(1, math.ceil(t_end / dt - 1e-9))
    sizes = [dt] * (n - 1)
    sizes.append(t_end - dt * (n - 1))
    return sizes


def run(
    f0: np.ndarray,
    mesh: PhaseMesh,
    wallspecs: dict,
    cfg: StepConfig,
    observers: tuple[Callable, ...] = (),
    steady_tol: float | None = None,
    stepper: Stepper | None = None,
    keep_records: bool = True,
    state_observers: tuple[Callable, ...] = (),
    stop: Callable | None = None,
) -> RunResult:
    """Integrate to ``cfg.t_end``; observers get a ``StepRecord`` after every step.

    ``state_observers`` are called as ``obs(record, f)`` with the new state;
    they must not modify it.  ``stop(record)`` returning true ends the run
    after that step.

    With ``steady_tol`` the run stops early once ``||f^{n+1}-f^n||_1 / dt``
    drops below it.
    """
    stepper = stepper or Stepper(mesh, wallspecs, cfg)
    dt = cfg.timestep(mesh)
    f = np.array(f0, dtype=float, copy=True)
    if not np.all(np.isfinite(f[mesh.interior])):
        raise NonFiniteState("initial state is not finite", step=0, time=0.0)
    records = []
    t = 0.0
    vol = mesh.cell_volumes
    w = mesh.vgrid.weights
    steady = False
    sizes = step_times(cfg.t_end, dt)
    done = 0
    for n, h in enumerate(sizes):
        f_new = stepper.step(f, t, h, n)
        t = cfg.t_end if n == len(sizes) - 1 else (n + 1) * dt
        fi = f_new[mesh.interior]
        change = float(vol @ (np.abs(fi - f[mesh.interior]) @ w)) / h
        mass, mom, energy = integrals(f_new, mesh)
        rec = StepRecord(
            n + 1,
            t,
            h,
            mass,
            mom,
            energy,
            float(fi.max()),
            float(fi.min()),
            change,
            stepper.scratch.flux_net,
            stepper.scratch.flux_gross,
        )
        if not math.isfinite(mass) or not math.isfinite(rec.max_f):
            raise NonFiniteState(f"non-finite state after step {n + 1}", step=n + 1, time=t)
        for obs in observers:
            obs(rec)
        for obs in state_observers:
            obs(rec, f_new)
        if keep_records:
            records.append(rec)
        f = f_new
        done = n + 1
        if steady_tol is not None and change < steady_tol:
            steady = True
            break
        if stop is not None and stop(rec):
            break
    if sizes:
        # leave ghosts consistent with the final interior state
        stepper.fill_ghosts(f, t)
    return RunResult(f, t, done, records, steady)
