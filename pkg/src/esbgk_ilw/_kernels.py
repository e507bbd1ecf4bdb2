"""Fused numba kernel for one IMEX step over all interior nodes.

Per node: upwind transport into a scratch row, the ten velocity moments of
the explicit predictor, relaxation of the stress tensor, the Gaussian target
and the closed-form implicit blend.  Status codes: 0 ok, 1 empty density,
2 corrected tensor not positive definite, 3 non-finite value.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

OK, EMPTY, NOT_SPD, NON_FINITE = 0, 1, 2, 3


@njit(cache=True)
def imex_update(f, out, interior, nb, v, W, dim, dx, dy, dt, eps, nu, c_tau, omega, esbgk):
    """Write ``f^{n+1}`` for every interior node into ``out``.

    Returns ``(status, node)``; on failure ``node`` is the offending row of
    ``interior``.
    """
    nv = v.shape[0]
    g = np.empty(nv)
    two_pi_cubed = (2.0 * math.pi) ** 3
    for k in range(interior.shape[0]):
        i = interior[k]
        m0 = m1 = m2 = m3 = m4 = m5 = m6 = m7 = m8 = m9 = 0.0
        for j in range(nv):
            fi = f[i, j]
            vx = v[j, 0]
            tr = 0.0
            if vx > 0.0:
                a1, a2 = f[nb[k, 0], j], f[nb[k, 1], j]
                tr += vx * ((3.0 * (fi - a1) - (a1 - a2)) / (2.0 * dx))
            elif vx < 0.0:
                a1, a2 = f[nb[k, 2], j], f[nb[k, 3], j]
                tr += vx * ((3.0 * (a1 - fi) - (a2 - a1)) / (2.0 * dx))
            if dim == 2:
                vy = v[j, 1]
                if vy > 0.0:
                    a1, a2 = f[nb[k, 4], j], f[nb[k, 5], j]
                    tr += vy * ((3.0 * (fi - a1) - (a1 - a2)) / (2.0 * dy))
                elif vy < 0.0:
                    a1, a2 = f[nb[k, 6], j], f[nb[k, 7], j]
                    tr += vy * ((3.0 * (a1 - fi) - (a2 - a1)) / (2.0 * dy))
            gj = fi - dt * tr
            g[j] = gj
            m0 += W[j, 0] * gj
            m1 += W[j, 1] * gj
            m2 += W[j, 2] * gj
            m3 += W[j, 3] * gj
            m4 += W[j, 4] * gj
            m5 += W[j, 5] * gj
            m6 += W[j, 6] * gj
            m7 += W[j, 7] * gj
            m8 += W[j, 8] * gj
            m9 += W[j, 9] * gj
        rho = m0
        if not (rho > 1e-300):
            return EMPTY, k
        ux, uy, uz = m1 / rho, m2 / rho, m3 / rho
        txx = m4 / rho - ux * ux
        tyy = m5 / rho - uy * uy
        tzz = m6 / rho - uz * uz
        txy = m7 / rho - ux * uy
        txz = m8 / rho - ux * uz
        tyz = m9 / rho - uy * uz
        T = (txx + tyy + tzz) / 3.0
        if not (T > 0.0):
            return NOT_SPD, k
        tau = c_tau * rho * T ** (1.0 - omega)
        b = eps / (eps + tau * dt)
        if esbgk:
            a = eps / (eps + (1.0 - nu) * tau * dt)
            # relaxed stress, then corrected tensor (1-nu) T I + nu Theta
            sxx = (1.0 - nu) * T + nu * (a * txx + (1.0 - a) * T)
            syy = (1.0 - nu) * T + nu * (a * tyy + (1.0 - a) * T)
            szz = (1.0 - nu) * T + nu * (a * tzz + (1.0 - a) * T)
            sxy = nu * a * txy
            sxz = nu * a * txz
            syz = nu * a * tyz
        else:
            sxx, syy, szz, sxy, sxz, syz = T, T, T, 0.0, 0.0, 0.0
        c00 = syy * szz - syz * syz
        c01 = sxz * syz - sxy * szz
        c02 = sxy * syz - sxz * syy
        det = sxx * c00 + sxy * c01 + sxz * c02
        trace = sxx + syy + szz
        if not (sxx > 0.0 and sxx * syy - sxy * sxy > 0.0 and det > 1e-36 * trace**3):
            return NOT_SPD, k
        c11 = sxx * szz - sxz * sxz
        c12 = sxy * sxz - sxx * syz
        c22 = sxx * syy - sxy * sxy
        inv = 1.0 / det
        pref = rho / math.sqrt(two_pi_cubed * det)
        for j in range(nv):
            cx = v[j, 0] - ux
            cy = v[j, 1] - uy
            cz = v[j, 2] - uz
            qf = (
                c00 * cx * cx
                + c11 * cy * cy
                + c22 * cz * cz
                + 2.0 * (c01 * cx * cy + c02 * cx * cz + c12 * cy * cz)
            ) * inv
            val = b * g[j] + (1.0 - b) * pref * math.exp(-0.5 * qf)
            if not math.isfinite(val):
                return NON_FINITE, k
            out[i, j] = val
    return OK, -1


@njit(cache=True)
def weno2d_extrapolate(f, stencil, gram, node_mask, avail, rows_foot, rows_ghost, lin, beta0, eps_w):
    """2D WENO values at every foot and ghost, shapes ``(G, Nv)`` each."""
    G = stencil.shape[0]
    nv = f.shape[1]
    fp = np.empty((G, nv))
    fg = np.empty((G, nv))
    vals = np.empty(9)
    a0 = lin[0] / (eps_w + beta0) ** 2
    for g in range(G):
        for n in range(nv):
            for i in range(9):
                vals[i] = f[stencil[g, i], n]
            alpha0 = a0 * avail[g, 0]
            alpha1 = 0.0
            alpha2 = 0.0
            for r in range(1, 3):
                if avail[g, r] == 0.0:
                    continue
                q = 0.0
                ss = 0.0
                for i in range(9):
                    if node_mask[g, r, i] == 0.0:
                        continue
                    ss += vals[i] * vals[i]
                    acc = 0.0
                    for j in range(9):
                        acc += gram[g, r, i, j] * vals[j]
                    q += vals[i] * acc
                beta = q / (eps_w + ss)
                a = lin[r] / (eps_w + beta) ** 2
                if r == 1:
                    alpha1 = a
                else:
                    alpha2 = a
            s = alpha0 + alpha1 + alpha2
            w0, w1, w2 = alpha0 / s, alpha1 / s, alpha2 / s
            p0 = p1 = p2 = 0.0
            e0 = e1 = e2 = 0.0
            for i in range(9):
                x = vals[i]
                p0 += rows_foot[g, 0, i] * x
                p1 += rows_foot[g, 1, i] * x
                p2 += rows_foot[g, 2, i] * x
                e0 += rows_ghost[g, 0, i] * x
                e1 += rows_ghost[g, 1, i] * x
                e2 += rows_ghost[g, 2, i] * x
            fp[g, n] = w0 * p0 + w1 * p1 + w2 * p2
            fg[g, n] = w0 * e0 + w1 * e1 + w2 * e2
    return fp, fg
