"""WENO-type extrapolation to boundary feet and ghost nodes, ENO differentiation.

The 1D extrapolant blends the constant, linear and quadratic Lagrange
polynomials through the three interior nodes nearest the wall.  The 2D one
blends tensor polynomials in Q_0, Q_1, Q_2 fitted on nested stencils of 1, 4
and 9 interior nodes picked along the inward normal.  Indicators are divided
by the local sum of squares so the weights do not depend on the scale of f.

All routines are vectorized over a trailing velocity axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CollinearFeetRequired, InsufficientInterior, NonFiniteInput, StencilOutsideDomain
from .phase_mesh import INTERIOR, GhostPoint, SpatialGrid

EPS_W = 1e-6


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NonFiniteInput("WENO input contains NaN or Inf")


# ---------------------------------------------------------------------------
# 1D
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WenoStencil1D:
    """Values at the three interior nodes nearest a wall, nearest first."""

    f1: np.ndarray
    f2: np.ndarray
    f3: np.ndarray
    dx: float
    eps_w: float = EPS_W


def linear_weights_1d(dx: float) -> tuple[float, float, float]:
    d0, d1 = dx * dx, dx
    d2 = 1.0 - d0 - d1
    if d2 <= 0:
        raise ValueError("spacing too coarse for positive linear weights (need dx + dx^2 < 1)")
    return d0, d1, d2


def indicators_1d(f1, f2, f3, dx: float, eps_w: float = EPS_W):
    """Smoothness indicators ``(beta0, beta1, beta2)``."""
    f1, f2, f3 = (np.asarray(a, dtype=float) for a in (f1, f2, f3))
    b0 = np.full(np.broadcast(f1, f2, f3).shape, dx * dx)
    b1 = (f2 - f1) ** 2 / (eps_w + f1 * f1 + f2 * f2)
    q = 61 * f1 * f1 - 196 * f1 * f2 + 160 * f2 * f2 + 74 * f1 * f3 - 124 * f2 * f3 + 25 * f3 * f3
    b2 = q / (12.0 * (eps_w + f1 * f1 + f2 * f2 + f3 * f3))
    return b0, b1, b2


def weights_1d(f1, f2, f3, dx: float, eps_w: float = EPS_W):
    d = linear_weights_1d(dx)
    betas = indicators_1d(f1, f2, f3, dx, eps_w)
    alpha = [dr / (eps_w + b) ** 2 for dr, b in zip(d, betas)]
    s = alpha[0] + alpha[1] + alpha[2]
    return alpha[0] / s, alpha[1] / s, alpha[2] / s


def weno_extrapolate_1d(st: WenoStencil1D, targets, boundary: float):
    """Extrapolate to ``targets`` via a Taylor expansion about the wall.

    Positions are signed offsets from ``x_1`` measured towards the interior
    (``x_2 = dx``, ``x_3 = 2 dx``); ``boundary`` and ``targets`` are <= 0.

    Returns:
        ``(values, derivs)`` where ``values[t]`` is the extrapolated value at
        ``targets[t]`` and ``derivs[k]`` the blended k-th derivative at the
        wall (k = 0, 1, 2).
    """
    f1, f2, f3 = (np.asarray(a, dtype=float) for a in (st.f1, st.f2, st.f3))
    _check_finite(f1, f2, f3)
    dx, sb = st.dx, float(boundary)
    w0, w1, w2 = weights_1d(f1, f2, f3, dx, st.eps_w)
    slope = (f2 - f1) / dx
    c = (f3 - 2.0 * f2 + f1) / (2.0 * dx * dx)
    p1 = f1 + slope * sb
    p2 = p1 + c * sb * (sb - dx)
    d0 = w0 * f1 + w1 * p1 + w2 * p2
    d1 = (w1 + w2) * slope + w2 * c * (2.0 * sb - dx)
    d2 = w2 * 2.0 * c
    derivs = np.stack([d0, d1, d2])
    values = []
    for t in np.atleast_1d(targets):
        h = float(t) - sb
        values.append(d0 + h * d1 + 0.5 * h * h * d2)
    return np.stack(values), derivs


# ---------------------------------------------------------------------------
# 2D
# ---------------------------------------------------------------------------


def _monomials(r: int):
    return [(lx, my) for lx in range(r + 1) for my in range(r + 1)]


def _moment(p: int) -> float:
    """Integral of ``s**p`` over ``[-1/2, 1/2]``."""
    return 0.0 if p % 2 else 2.0 * 0.5 ** (p + 1) / (p + 1)


def _indicator_gram(r: int, dx: float, dy: float) -> np.ndarray:
    """Gram matrix ``H`` with ``beta * sum f^2 = a^T H a`` for q = sum a_lm xi^l eta^m.

    ``xi = (x - x_p)/dx``, ``eta = (y - y_p)/dy``; the cell K is the unit
    square in these coordinates.
    """
    mons = _monomials(r)
    nm = len(mons)
    area = dx * dy
    H = np.zeros((nm, nm))
    for ax in range(r + 1):
        for ay in range(r + 1 - ax):
            order = ax + ay
            if order < 1:
                continue
            # D^alpha of each monomial: coefficient and resulting exponents
            D = []
            for lx, my in mons:
                if lx < ax or my < ay:
                    D.append(None)
                    continue
                coef = math.perm(lx, ax) * math.perm(my, ay) / (dx**ax * dy**ay)
                D.append((coef, lx - ax, my - ay))
            scale = area ** (order - 1) * area
            for i, di in enumerate(D):
                if di is None:
                    continue
                for j, dj in enumerate(D):
                    if dj is None:
                        continue
                    H[i, j] += scale * di[0] * dj[0] * _moment(di[1] + dj[1]) * _moment(di[2] + dj[2])
    return H


@dataclass
class WenoStencil2D:
    """Nested 2D stencil attached to one boundary foot.

    ``nodes`` are grid flat indices of S_2 (or of the largest admissible
    substencil); ``subsets[r]`` indexes into ``nodes`` for S_r.  ``coef[r]``
    maps node values to monomial coefficients of q_r in scaled coordinates
    about the foot; ``gram[r]`` is the indicator quadratic form on node values.
    """

    foot: np.ndarray
    spacing: tuple[float, float]
    nodes: np.ndarray
    positions: np.ndarray
    subsets: list
    r_max: int
    coef: list = field(default_factory=list)
    gram: list = field(default_factory=list)
    eps_w: float = EPS_W

    def __post_init__(self):
        if not self.coef:
            self._build()

    def _build(self):
        dx, dy = self.spacing
        xi = (self.positions[:, 0] - self.foot[0]) / dx
        eta = (self.positions[:, 1] - self.foot[1]) / dy
        self.coef, self.gram = [], []
        for r in range(self.r_max + 1):
            sub = self.subsets[r]
            mons = _monomials(r)
            V = np.array([[xi[k] ** lx * eta[k] ** my for lx, my in mons] for k in sub])
            A = np.linalg.inv(V)
            self.coef.append(A)
            self.gram.append(A.T @ _indicator_gram(r, dx, dy) @ A if r > 0 else None)

    def linear_weights(self) -> tuple[float, float, float]:
        dx, dy = self.spacing
        d0 = dx * dx + dy * dy
        d1 = math.sqrt(d0)
        d2 = 1.0 - d0 - d1
        if d2 <= 0:
            raise ValueError("spacing too coarse for positive linear weights")
        return d0, d1, d2

    def indicators(self, values: np.ndarray) -> list:
        """``beta_r`` for node values of shape ``(len(nodes), Nv)``."""
        dx, dy = self.spacing
        out = [np.full(values.shape[1:], dx * dx + dy * dy)]
        for r in range(1, self.r_max + 1):
            fs = values[self.subsets[r]]
            q = np.einsum("i...,ij,j...->...", fs, self.gram[r], fs)
            out.append(q / (self.eps_w + np.sum(fs * fs, axis=0)))
        return out

    def weights(self, values: np.ndarray) -> np.ndarray:
        """Nonlinear weights, shape ``(3, Nv)``; zero for unavailable stencils."""
        values = np.asarray(values, dtype=float)
        _check_finite(values)
        d = self.linear_weights()
        betas = self.indicators(values)
        alpha = np.zeros((3,) + values.shape[1:])
        for r in range(self.r_max + 1):
            alpha[r] = d[r] / (self.eps_w + betas[r]) ** 2
        return alpha / alpha.sum(axis=0)

    def evaluation_rows(self, point) -> list:
        """Per-stencil row vectors giving ``q_r(point)`` from node values."""
        dx, dy = self.spacing
        xi, eta = (point[0] - self.foot[0]) / dx, (point[1] - self.foot[1]) / dy
        rows = []
        for r in range(self.r_max + 1):
            m = np.array([xi**lx * eta**my for lx, my in _monomials(r)])
            row = np.zeros(len(self.nodes))
            row[self.subsets[r]] = m @ self.coef[r]
            rows.append(row)
        return rows

    def gradient_rows(self, r: int, point) -> np.ndarray:
        """Rows ``(2, len(nodes))`` giving the physical gradient of ``q_r`` at ``point``."""
        dx, dy = self.spacing
        xi, eta = (point[0] - self.foot[0]) / dx, (point[1] - self.foot[1]) / dy
        gx, gy = [], []
        for lx, my in _monomials(r):
            gx.append(lx * xi ** max(lx - 1, 0) * eta**my / dx if lx else 0.0)
            gy.append(my * xi**lx * eta ** max(my - 1, 0) / dy if my else 0.0)
        out = np.zeros((2, len(self.nodes)))
        out[:, self.subsets[r]] = np.array([gx, gy]) @ self.coef[r]
        return out

    def extrapolate(self, values: np.ndarray, points) -> np.ndarray:
        """``sum_r w_r q_r(point)`` for each point; output ``(len(points), Nv)``."""
        values = np.asarray(values, dtype=float)
        w = self.weights(values)
        out = []
        for p in np.atleast_2d(points):
            rows = self.evaluation_rows(p)
            out.append(sum(w[r] * (rows[r] @ values) for r in range(self.r_max + 1)))
        return np.stack(out)


def weno_extrapolate_2d(st: WenoStencil2D, values: np.ndarray, target) -> np.ndarray:
    return st.extrapolate(values, np.atleast_2d(target))[0]


def _pick_on_line(grid: SpatialGrid, labeling: np.ndarray, axis: int, line: int, crossing: float, k: int, reach: float):
    """Up to ``k`` interior nodes on a grid line, nearest to ``crossing`` along it."""
    other = 1 - axis
    coords = grid.axis(other)
    if axis == 1:
        labs = labeling[:, line]
    else:
        labs = labeling[line, :]
    cand = np.flatnonzero(labs == INTERIOR)
    if len(cand) == 0:
        return []
    dist = np.abs(coords[cand] - crossing)
    order = np.lexsort((cand, dist))
    chosen = [int(cand[i]) for i in order[:k] if dist[i] <= reach]
    return chosen


def select_stencil_2d(ghost: GhostPoint, labeling: np.ndarray, grid: SpatialGrid) -> WenoStencil2D:
    """Nested interior stencils along the inward normal of ``ghost``.

    Lines of constant y are used when the normal is closer to the y axis,
    lines of constant x otherwise.  On the three first lines beyond the foot
    the nodes nearest to the crossing point with the normal are taken: one on
    line 1 for S_0, two on lines 1-2 for S_1, three on lines 1-3 for S_2.

    Raises:
        InsufficientInterior: with ``fallback`` set to the largest admissible
            nested stencil when S_2 cannot be formed.
    """
    xp, n = np.asarray(ghost.foot, dtype=float), np.asarray(ghost.normal, dtype=float)
    axis = 1 if abs(n[1]) >= abs(n[0]) else 0
    other = 1 - axis
    h_line, h_along = grid.spacing[axis], grid.spacing[other]
    coords = grid.axis(axis)
    step = 1 if n[axis] > 0 else -1
    # first grid line strictly beyond the foot along the normal
    s = (xp[axis] - grid.origin[axis]) / h_line
    first = math.floor(s) + 1 if step > 0 else math.ceil(s) - 1
    reach = 2.0 * h_along + 1e-9 * h_along
    picks = []
    for m in range(3):
        line = first + m * step
        if not 0 <= line < grid.counts[axis]:
            break
        t = (coords[line] - xp[axis]) / n[axis]
        crossing = xp[other] + t * n[other]
        chosen = _pick_on_line(grid, labeling, axis, line, crossing, 3, reach)
        picks.append((line, chosen))

    need = (1, 2, 3)
    r_max = -1
    for r in range(3):
        if len(picks) > r and all(len(picks[m][1]) >= need[r] for m in range(r + 1)):
            r_max = r
        else:
            break
    if r_max < 0:
        raise InsufficientInterior(f"no interior node along the normal of ghost {ghost.index}", fallback=None)

    def flat(line, j):
        idx = [0, 0]
        idx[axis], idx[other] = line, j
        return grid.flat(idx)

    nodes, subsets = [], [[] for _ in range(r_max + 1)]
    # S_r = first (r+1) picks on lines 0..r; order nodes so that S_0 comes first
    key_to_pos = {}
    for r in range(r_max + 1):
        for m in range(r + 1):
            line, chosen = picks[m]
            for j in chosen[: r + 1]:
                key = flat(line, j)
                if key not in key_to_pos:
                    key_to_pos[key] = len(nodes)
                    nodes.append(key)
                subsets[r].append(key_to_pos[key])
    nodes = np.array(nodes, dtype=np.int64)
    for k in nodes:
        if labeling.ravel()[k] != INTERIOR:
            raise StencilOutsideDomain(f"stencil node {grid.unflat(int(k))} is not interior")
    st = WenoStencil2D(
        foot=xp,
        spacing=(grid.spacing[0], grid.spacing[1]),
        nodes=nodes,
        positions=grid.points[nodes],
        subsets=[np.array(s_, dtype=np.int64) for s_ in subsets],
        r_max=r_max,
    )
    if r_max < 2:
        raise InsufficientInterior(f"only S_{r_max} admissible for ghost {ghost.index}", fallback=st)
    return st


# ---------------------------------------------------------------------------
# ENO differentiation along the wall
# ---------------------------------------------------------------------------


def eno_tangential_derivative(values, positions, center: int, points=None) -> np.ndarray:
    """ENO derivative at ``positions[center]`` from values at sorted wall positions.

    Starting from the centre node the stencil grows one node at a time
    towards the side with the smaller divided difference (first, then
    second order); the result is the derivative of the quadratic through the
    chosen three nodes.  ``points`` (2D coordinates of the feet), if given,
    are checked for collinearity.
    """
    s = np.asarray(positions, dtype=float)
    f = np.asarray(values, dtype=float)
    m = len(s)
    if m < 3:
        raise ValueError("ENO differentiation needs at least three feet")
    if np.any(np.diff(s) <= 0):
        raise ValueError("feet must be strictly ordered by arc length")
    if points is not None:
        p = np.asarray(points, dtype=float)
        t = p[-1] - p[0]
        t = t / np.linalg.norm(t)
        off = (p - p[0]) @ np.array([-t[1], t[0]])
        if np.max(np.abs(off)) > 1e-9 * max(1.0, float(np.ptp(s))):
            raise CollinearFeetRequired("feet do not lie on one straight piece")
    c = int(center)

    def dd1(i):
        return (f[i + 1] - f[i]) / (s[i + 1] - s[i])

    def dd2(i):
        return (dd1(i + 1) - dd1(i)) / (s[i + 2] - s[i])

    def deriv(i):
        # derivative at s_c of the quadratic through nodes i, i+1, i+2
        a = dd1(i)
        return a + dd2(i) * ((s[c] - s[i]) + (s[c] - s[i + 1]))

    shape = f.shape[1:]
    # step 1: two-point stencil start index, {c-1, c} -> c-1 or {c, c+1} -> c
    if c == 0:
        lo1 = np.zeros(shape, dtype=int)
    elif c == m - 1:
        lo1 = np.full(shape, c - 1)
    else:
        lo1 = np.where(np.abs(dd1(c - 1)) <= np.abs(dd1(c)), c - 1, c)
    # step 2: extend left (start lo1-1) or right (start lo1)
    cand = {}
    for i in range(0, m - 2):
        if i <= c <= i + 2:
            cand[i] = deriv(i)
    res = np.empty(shape)
    lo1 = np.broadcast_to(lo1, shape)
    for a in np.unique(lo1):
        left_ok, right_ok = a - 1 >= 0 and (a - 1) in cand, a + 2 <= m - 1 and a in cand
        mask = lo1 == a
        if left_ok and right_ok:
            choose_left = np.abs(dd2(a - 1)) < np.abs(dd2(a))
            val = np.where(choose_left, cand[a - 1], cand[a])
        elif left_ok:
            val = cand[a - 1]
        else:
            val = cand[a]
        res[mask] = np.broadcast_to(val, shape)[mask]
    return res if shape else float(res)
