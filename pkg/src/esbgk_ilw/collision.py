"""BGK and ES-BGK relaxation operators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .moments import MacroState, gaussian_esbgk, maxwellian
from .phase_mesh import VelocityGrid


@dataclass(frozen=True)
class RelaxationModel:
    """Relaxation model with frequency ``tau = c_tau * rho * T**(1 - omega)``.

    ``kind`` is ``"BGK"`` or ``"ESBGK"``; ``nu`` is ignored for BGK.
    """

    kind: str = "ESBGK"
    nu: float = 0.0
    c_tau: float = 1.0
    omega: float = 1.0

    def __post_init__(self):
        if self.kind not in ("BGK", "ESBGK"):
            raise ValueError(f"unknown relaxation kind {self.kind!r}")
        if not -0.5 <= self.nu < 1.0:
            raise ValueError("nu must lie in [-1/2, 1)")
        if self.c_tau < 0:
            raise ValueError("tau prefactor must be non-negative")

    @property
    def effective_nu(self) -> float:
        return 0.0 if self.kind == "BGK" else self.nu

    @property
    def prandtl(self) -> float:
        return 1.0 / (1.0 - self.effective_nu)


def relaxation_time(rho, T, model: RelaxationModel):
    """Relaxation frequency; works on scalars and arrays."""
    rho = np.asarray(rho, dtype=float)
    T = np.asarray(T, dtype=float)
    if np.any(rho <= 0) or np.any(T <= 0):
        raise ValueError("relaxation_time needs rho > 0 and T > 0")
    tau = model.c_tau * rho * T ** (1.0 - model.omega)
    return float(tau) if tau.ndim == 0 else tau


def equilibrium(ms: MacroState, model: RelaxationModel, vgrid: VelocityGrid) -> np.ndarray:
    if model.kind == "BGK":
        return maxwellian(ms.rho, ms.u, ms.T, vgrid)
    return gaussian_esbgk(ms, model.nu, vgrid)


def collision_operator(f, ms: MacroState, model: RelaxationModel, eps: float, vgrid: VelocityGrid) -> np.ndarray:
    """``(tau/eps) (G[f] - f)`` at one node (Maxwellian target for BGK)."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    tau = relaxation_time(ms.rho, ms.T, model)
    return (tau / eps) * (equilibrium(ms, model, vgrid) - np.asarray(f, dtype=float))
