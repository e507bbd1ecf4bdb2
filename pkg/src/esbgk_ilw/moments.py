"""Velocity moments, Maxwellians and anisotropic Gaussians on a VelocityGrid.

All quadratures are plain node sums ``sum_j w_j phi(v_j) f_j``.  Functions
accept a single node (1D array over velocities) or a batch (leading node axis).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import EmptyDensity, NegativeDensity, NonPositiveTemperature, TensorNotSPD
from .phase_mesh import VelocityGrid

RHO_MIN = 1e-300
NEG_TOL = 1e-8


@dataclass(frozen=True)
class MacroState:
    """Macroscopic state at one node.

    ``theta`` is the normalized second central moment (trace ``3T``) and
    ``sigma`` the raw second moment ``int v v f dv``.
    """

    rho: float
    u: np.ndarray
    T: float
    E: float
    theta: np.ndarray
    sigma: np.ndarray

    def corrected_tensor(self, nu: float) -> np.ndarray:
        return corrected_tensor(self.T, self.theta, nu)


def raw_moments(f: np.ndarray, vgrid: VelocityGrid) -> np.ndarray:
    """The ten quadratures of ``[1, v, v_x^2, v_y^2, v_z^2, v_x v_y, v_x v_z, v_y v_z]``."""
    return f @ (vgrid.weights[:, None] * vgrid.basis)


def unpack(m: np.ndarray):
    """Split raw moments into ``(rho, momentum, second moment tensor)``."""
    rho = m[..., 0]
    mom = m[..., 1:4]
    s = np.empty(m.shape[:-1] + (3, 3))
    s[..., 0, 0], s[..., 1, 1], s[..., 2, 2] = m[..., 4], m[..., 5], m[..., 6]
    s[..., 0, 1] = s[..., 1, 0] = m[..., 7]
    s[..., 0, 2] = s[..., 2, 0] = m[..., 8]
    s[..., 1, 2] = s[..., 2, 1] = m[..., 9]
    return rho, mom, s


def check_sign(f: np.ndarray) -> None:
    fmin, fmax = float(np.min(f)), float(np.max(np.abs(f)))
    if fmin < 0.0:
        if fmin < -NEG_TOL * fmax:
            raise NegativeDensity(f"distribution negative beyond tolerance (min {fmin:.3e}, max {fmax:.3e})")
        warnings.warn(f"small negative distribution values (min {fmin:.3e})", RuntimeWarning, stacklevel=3)


def compute_moments(f: np.ndarray, vgrid: VelocityGrid) -> MacroState:
    """Density, velocity, temperature, energy and stress tensors at one node."""
    f = np.asarray(f, dtype=float)
    check_sign(f)
    rho, mom, sigma = unpack(raw_moments(f, vgrid))
    rho = float(rho)
    if not rho > RHO_MIN:
        raise EmptyDensity(f"density {rho:.3e} too small to define velocity and temperature")
    u = mom / rho
    theta = sigma / rho - np.outer(u, u)
    theta = 0.5 * (theta + theta.T)
    T = float(np.trace(theta) / 3.0)
    E = 0.5 * float(np.trace(sigma))
    return MacroState(rho, u, T, E, theta, sigma)


def macro_arrays(f: np.ndarray, vgrid: VelocityGrid):
    """Batched ``(rho, u, T, theta)`` for ``f`` of shape ``(N, Nv)``."""
    rho, mom, sigma = unpack(raw_moments(f, vgrid))
    if np.any(~(rho > RHO_MIN)):
        k = int(np.argmin(rho))
        raise EmptyDensity(f"density {rho[k]:.3e} at node {k}")
    u = mom / rho[:, None]
    theta = sigma / rho[:, None, None] - u[:, :, None] * u[:, None, :]
    T = np.trace(theta, axis1=1, axis2=2) / 3.0
    return rho, u, T, theta


def corrected_tensor(T, theta, nu: float) -> np.ndarray:
    """``(1 - nu) T I + nu Theta`` (batched over leading axes)."""
    T = np.asarray(T, dtype=float)
    eye = np.eye(3)
    return (1.0 - nu) * T[..., None, None] * eye + nu * np.asarray(theta)


def maxwellian(rho: float, u, T: float, vgrid: VelocityGrid) -> np.ndarray:
    """``rho / (2 pi T)^{3/2} exp(-|v - u|^2 / 2T)`` at every stored node."""
    if not T > 0:
        raise NonPositiveTemperature(f"temperature must be positive, got {T}")
    c = vgrid.v - np.asarray(u, dtype=float)
    return rho / (2.0 * np.pi * T) ** 1.5 * np.exp(-np.einsum("ij,ij->i", c, c) / (2.0 * T))


def _factor(tensor: np.ndarray) -> np.ndarray:
    tr = float(np.trace(tensor))
    if not np.all(np.isfinite(tensor)) or not tr > 0:
        raise TensorNotSPD("tensor is not finite or has non-positive trace")
    try:
        L = np.linalg.cholesky(tensor)
    except np.linalg.LinAlgError as exc:
        raise TensorNotSPD("corrected tensor is not positive definite") from exc
    if np.min(np.diag(L)) ** 2 <= 1e-12 * tr:
        raise TensorNotSPD("corrected tensor is numerically singular")
    return L


def gaussian(rho: float, u, tensor: np.ndarray, vgrid: VelocityGrid) -> np.ndarray:
    """Gaussian with density ``rho``, mean ``u`` and covariance ``tensor``."""
    L = _factor(np.asarray(tensor, dtype=float))
    c = vgrid.v - np.asarray(u, dtype=float)
    y = np.linalg.solve(L, c.T)
    q = np.einsum("ij,ij->j", y, y)
    det = float(np.prod(np.diag(L)) ** 2)
    return rho / np.sqrt((2.0 * np.pi) ** 3 * det) * np.exp(-0.5 * q)


def gaussian_esbgk(ms: MacroState, nu: float, vgrid: VelocityGrid) -> np.ndarray:
    """ES-BGK target ``G[f]`` built from the corrected tensor of ``ms``."""
    return gaussian(ms.rho, ms.u, ms.corrected_tensor(nu), vgrid)


def gaussian_batch(rho, u, tensor, v: np.ndarray) -> np.ndarray:
    """Batched Gaussians: ``rho (N,)``, ``u (N,3)``, ``tensor (N,3,3)`` -> ``(N, Nv)``."""
    try:
        L = np.linalg.cholesky(tensor)
    except np.linalg.LinAlgError as exc:
        raise TensorNotSPD("corrected tensor is not positive definite") from exc
    diag = np.diagonal(L, axis1=1, axis2=2)
    tr = np.trace(tensor, axis1=1, axis2=2)
    bad = np.min(diag, axis=1) ** 2 <= 1e-12 * tr
    if np.any(bad):
        raise TensorNotSPD(f"corrected tensor numerically singular at node {int(np.argmax(bad))}")
    inv = np.linalg.inv(tensor)
    c = v[None, :, :] - u[:, None, :]
    q = np.sum(np.matmul(c, inv) * c, axis=2)
    det = np.prod(diag, axis=1) ** 2
    return (rho / np.sqrt((2.0 * np.pi) ** 3 * det))[:, None] * np.exp(-0.5 * q)
