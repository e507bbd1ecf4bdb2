import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from esbgk_ilw.errors import CollinearFeetRequired, InsufficientInterior, NonFiniteInput
from esbgk_ilw.geometry import HalfPlane, box
from esbgk_ilw.phase_mesh import GHOST, SpatialGrid, boundary_foot, classify_points
from esbgk_ilw.reconstruction import (
    WenoStencil1D,
    eno_tangential_derivative,
    indicators_1d,
    linear_weights_1d,
    select_stencil_2d,
    weights_1d,
    weno_extrapolate_1d,
)

finite = st.floats(-50, 50, allow_nan=False)


def extrap(f, dx, targets, sb):
    st_ = WenoStencil1D(*(np.asarray(v, dtype=float) for v in f), dx)
    return weno_extrapolate_1d(st_, targets, sb)


# -- 1D ------------------------------------------------------------------------


def test_beta2_quadratic_form_rederived():
    f1, f2, f3, s = sp.symbols("f1 f2 f3 s")
    # quadratic through (0, f1), (1, f2), (2, f3) in units of dx; cell [-1, 0]
    p = sp.interpolate([(0, f1), (1, f2), (2, f3)], s)
    beta = sp.expand(12 * sp.integrate(sp.diff(p, s) ** 2 + sp.diff(p, s, 2) ** 2, (s, -1, 0)))
    poly = sp.Poly(beta, f1, f2, f3)
    assert poly.coeff_monomial(f1 * f2) == -196
    # the form used in the code, recovered by polarization
    vals = {}
    for a, b, c in [(1, 0, 0), (0, 1, 0), (0, 0, 1), (1, 1, 0), (1, 0, 1), (0, 1, 1)]:
        _, _, b2 = indicators_1d(a, b, c, 0.1, eps_w=1e-300)
        vals[(a, b, c)] = float(b2) * 12 * (a * a + b * b + c * c)
    code = {
        "f1^2": vals[(1, 0, 0)],
        "f2^2": vals[(0, 1, 0)],
        "f3^2": vals[(0, 0, 1)],
        "f1f2": vals[(1, 1, 0)] - vals[(1, 0, 0)] - vals[(0, 1, 0)],
        "f1f3": vals[(1, 0, 1)] - vals[(1, 0, 0)] - vals[(0, 0, 1)],
        "f2f3": vals[(0, 1, 1)] - vals[(0, 1, 0)] - vals[(0, 0, 1)],
    }
    exact = {
        "f1^2": poly.coeff_monomial(f1**2),
        "f2^2": poly.coeff_monomial(f2**2),
        "f3^2": poly.coeff_monomial(f3**2),
        "f1f2": poly.coeff_monomial(f1 * f2),
        "f1f3": poly.coeff_monomial(f1 * f3),
        "f2f3": poly.coeff_monomial(f2 * f3),
    }
    for k in exact:
        assert code[k] == pytest.approx(float(exact[k]), abs=1e-9)


def test_beta2_vanishes_on_constants():
    _, b1, b2 = indicators_1d(3.0, 3.0, 3.0, 0.1, eps_w=0.0)
    assert b1 == 0.0 and abs(b2) < 1e-15


def test_constant_data_exact():
    vals, d = extrap([2.5, 2.5, 2.5], 0.05, [-0.01, -0.06], -0.01)
    assert np.all(vals == 2.5)
    assert d[0] == 2.5 and d[1] == 0.0 and d[2] == 0.0


def test_linear_data_recovered():
    # a + b x with a = O(1), b = 0.1: the weights sit at the linear weights
    dx, sb = 1e-2, -0.3e-2
    a, b = 1.0, 0.1
    vals, d = extrap([a, a + b * dx, a + 2 * b * dx], dx, [sb, -1.3e-2], sb)
    assert abs(vals[0] - (a + b * sb)) <= 1e-10
    assert abs(vals[1] - (a - b * 1.3e-2)) <= 1e-9
    # with b = 1 the constant stencil keeps weight ~1e-5 at dx = 1e-2; fine grids recover it
    dx = 1e-4
    sb = -0.3 * dx
    vals, _ = extrap([1.0, 1.0 + dx, 1.0 + 2 * dx], dx, [sb], sb)
    assert abs(vals[0] - (1.0 + sb)) <= 1e-10


def weights_oracle(f1, f2, f3, dx, eps=1e-6):
    """Indicator and weight formulas evaluated from scratch."""
    b0 = dx * dx
    b1 = (f2 - f1) ** 2 / (eps + f1 * f1 + f2 * f2)
    b2 = (61 * f1**2 + 160 * f2**2 + 25 * f3**2 + 74 * f1 * f3 - 196 * f1 * f2 - 124 * f2 * f3) / (
        12 * (eps + f1 * f1 + f2 * f2 + f3 * f3)
    )
    d = [dx * dx, dx, 1 - dx - dx * dx]
    a = [d[0] / (eps + b0) ** 2, d[1] / (eps + b1) ** 2, d[2] / (eps + b2) ** 2]
    s = sum(a)
    return [x / s for x in a]


@pytest.mark.parametrize("dx", [0.1, 0.01])
def test_shock_data(dx):
    f = (1.0, 1.0, 100.0)
    w = weights_1d(*f, dx)
    ref = weights_oracle(*f, dx)
    assert np.allclose(w, ref, rtol=1e-12)
    assert w[2] <= 1e-4
    vals, _ = extrap(f, dx, [-0.4 * dx], -0.4 * dx)
    assert abs(vals[0] - 1.0) <= 1e-3


@settings(max_examples=200, deadline=None)
@given(finite, finite, finite, st.sampled_from([0.1, 0.05, 0.01]))
def test_weights_normalized(f1, f2, f3, dx):
    w = weights_1d(f1, f2, f3, dx)
    assert abs(sum(w) - 1.0) <= 1e-14
    assert all(x >= 0 for x in w)


@settings(max_examples=200, deadline=None)
@given(finite, finite, finite, st.sampled_from([10.0, 100.0]))
def test_indicator_scale_robust(f1, f2, f3, lam):
    # each indicator is normalized by the sum of squares over its own stencil
    sums = (f1 * f1 + f2 * f2, f1 * f1 + f2 * f2 + f3 * f3)
    assume(max(sums) >= 1.0)
    b = indicators_1d(f1, f2, f3, 0.1)
    bl = indicators_1d(lam * f1, lam * f2, lam * f3, 0.1)
    for x, y, s2 in zip(b[1:], bl[1:], sums):
        if s2 >= 1.0:
            assert abs(y - x) <= 1e-6 * abs(x) + 1e-13  # indicators are O(1); floor is roundoff


@settings(max_examples=200, deadline=None)
@given(st.floats(0.1, 10), st.floats(10, 1000), st.sampled_from([0.1, 0.05, 0.01]), st.booleans())
def test_shock_family_bounded(a, jump, dx, up):
    # the (1, 1, 100) family: flat next to the wall, jump before the third node
    data = (a, a, a + jump if up else max(a - jump, 0.0))
    vals, _ = extrap(data, dx, [-0.5 * dx, -1.5 * dx], -0.5 * dx)
    lo, hi = min(data), max(data)
    assert np.all(lo - 1e-3 * (hi - lo) <= vals) and np.all(vals <= hi + 1e-3 * (hi - lo))


def test_extrapolation_rejects_nonfinite():
    with pytest.raises(NonFiniteInput):
        extrap([1.0, np.nan, 1.0], 0.1, [-0.05], -0.05)


def test_linear_weights_positive():
    assert sum(linear_weights_1d(0.1)) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        linear_weights_1d(0.7)


def test_quadratic_converges_third_order():
    errs = []
    for dx in (0.02, 0.01, 0.005):
        x = np.array([0.0, dx, 2 * dx])
        f = np.exp(x) + 1.0
        sb = -0.4 * dx
        vals, _ = extrap(list(f), dx, [sb - dx], sb)
        errs.append(abs(vals[0] - (np.exp(sb - dx) + 1.0)))
    assert math.log2(errs[0] / errs[1]) > 2.5 and math.log2(errs[1] / errs[2]) > 2.5


# -- 2D ------------------------------------------------------------------------


def channel(h=0.01, n=30, offset=0.37):
    g = SpatialGrid(2, (0.0, 0.0), (h, h), (n, n))
    geo = box((2.5 * h, (2 + offset) * h), ((n - 3.5) * h, (n - 3 - offset) * h))
    return g, geo


def ghosts_of(geo, g, label=None):
    lab = classify_points(geo, g)
    out = []
    for k in np.flatnonzero(lab.ravel() == GHOST):
        gp = boundary_foot(g.unflat(k), geo, g)
        if (label is None or gp.label == label) and not gp.corner:
            out.append(gp)
    return lab, out


def test_normal_plus_y_takes_block_above():
    g, geo = channel()
    lab, gps = ghosts_of(geo, g, "bottom")
    gp = next(p for p in gps if p.index[0] == 15 and p.distance > 0.5 * g.spacing[1])
    st_ = select_stencil_2d(gp, lab, g)
    idx = sorted(tuple(g.unflat(int(k))) for k in st_.nodes)
    first_row = int(math.floor(gp.foot[1] / g.spacing[1])) + 1
    expected = sorted((i, j) for i in (14, 15, 16) for j in range(first_row, first_row + 3))
    assert idx == expected
    assert tuple(g.unflat(int(st_.nodes[st_.subsets[0][0]]))) == (15, first_row)


def brute_nearest(lab, g, foot, n, k_line):
    """Lines of constant y beyond the foot; nearest three interior nodes to the crossing."""
    h = g.spacing
    first = int(math.floor(foot[1] / h[1])) + 1
    line = first + k_line
    y = line * h[1]
    cross = foot[0] + (y - foot[1]) / n[1] * n[0]
    cands = [(abs(i * h[0] - cross), i) for i in range(g.counts[0]) if lab[i, line] == 1]
    cands.sort()
    return line, sorted(i for _, i in cands[:3])


def test_diagonal_normal_matches_bruteforce():
    h = 0.01
    g = SpatialGrid(2, (0.0, 0.0), (h, h), (40, 40))
    c = np.array([0.2, 0.2])
    # half-plane with a normal at 45 degrees, intersected with a generous box
    n = np.array([1.0, 1.0]) / math.sqrt(2)
    geo = HalfPlane(c - 0.1 * n + [0.003, 0.0], n, "wall") & box((0.02, 0.02), (0.37, 0.37))
    lab, gps = ghosts_of(geo, g, "wall")
    checked = 0
    for gp in gps:
        if not (0.12 < gp.foot[0] < 0.2):
            continue
        st_ = select_stencil_2d(gp, lab, g)
        got = {}
        for k in st_.nodes:
            i, j = g.unflat(int(k))
            got.setdefault(j, []).append(i)
        for m in range(3):
            line, exp = brute_nearest(lab, g, gp.foot, gp.normal, m)
            assert sorted(got[line]) == exp
        checked += 1
    assert checked >= 3


def test_thin_channel_falls_back():
    h = 0.01
    g = SpatialGrid(2, (0.0, 0.0), (h, h), (30, 12))
    # two interior rows only
    geo = box((2.5 * h, 4.4 * h), (27.5 * h, 6.6 * h))
    lab, gps = ghosts_of(geo, g, "bottom")
    gp = next(p for p in gps if p.index[0] == 15)
    with pytest.raises(InsufficientInterior) as ei:
        select_stencil_2d(gp, lab, g)
    assert ei.value.fallback is not None and ei.value.fallback.r_max == 1


@pytest.fixture(scope="module")
def stencil2d():
    g, geo = channel()
    lab, gps = ghosts_of(geo, g, "bottom")
    gp = gps[len(gps) // 2]
    return g, gp, select_stencil_2d(gp, lab, g)


def test_substencils_interpolate(stencil2d):
    g, gp, st_ = stencil2d
    rng = np.random.default_rng(0)
    vals = rng.random((len(st_.nodes), 4)) + 1.0
    for r in range(3):
        sub = st_.subsets[r]
        for k in sub:
            p = st_.positions[k]
            rows = st_.evaluation_rows(p)
            assert np.allclose(rows[r] @ vals, vals[k], atol=1e-10 * vals.max())
    assert set(st_.subsets[0]) <= set(st_.subsets[1]) <= set(st_.subsets[2])
    assert [len(s) for s in st_.subsets] == [1, 4, 9]


def test_2d_constant_and_bilinear(stencil2d):
    g, gp, st_ = stencil2d
    c = np.full((9, 1), 1.7)
    assert st_.extrapolate(c, [gp.position, gp.foot])[:, 0].tolist() == pytest.approx([1.7, 1.7], abs=1e-14)
    xy = (st_.positions[:, 0] * st_.positions[:, 1])[:, None] + 1.0
    out = st_.extrapolate(xy, [gp.position])[0, 0]
    assert abs(out - (gp.position[0] * gp.position[1] + 1.0)) <= 1e-8


def test_2d_jump_picks_constant(stencil2d):
    g, gp, st_ = stencil2d
    # flat on the two lines nearest the wall, jump before the third (the 1D (1, 1, 100) layout)
    vals = np.ones((9, 1))
    q0 = st_.subsets[0][0]
    third = st_.positions[:, 1] > st_.positions[q0, 1] + 1.5 * g.spacing[1]
    vals[third] = 100.0
    out = st_.extrapolate(vals, [gp.foot, gp.position])[:, 0]
    assert np.all(np.abs(out - vals[q0, 0]) <= 1e-3)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=9, max_size=9), st.sampled_from([10.0, 100.0]))
def test_2d_weights_and_scale(stencil2d, vals, lam):
    g, gp, st_ = stencil2d
    v = np.array(vals)[:, None]
    w = st_.weights(v)
    assert abs(w.sum() - 1.0) <= 1e-14 and np.all(w >= 0)
    b = st_.indicators(v)
    bl = st_.indicators(lam * v)
    for r in (1, 2):
        sub = v[st_.subsets[r]]
        if np.sum(sub * sub) >= 1.0:
            x, y = float(b[r][0]), float(bl[r][0])
            assert abs(y - x) <= 1e-6 * abs(x) + 1e-13  # indicators are O(1); floor is roundoff


# -- ENO ------------------------------------------------------------------------


def test_eno_linear_and_constant():
    s = np.array([0.0, 0.1, 0.25, 0.3, 0.42])
    assert eno_tangential_derivative(2.0 + 3.0 * s, s, 2) == pytest.approx(3.0, abs=1e-12)
    assert eno_tangential_derivative(np.full(5, 4.0), s, 2) == 0.0


def test_eno_jump_on_right_uses_left_side():
    h = 0.1
    s = np.arange(5) * h
    f = np.array([1.0, 1.2, 1.5, 9.0, 9.5])
    got = eno_tangential_derivative(f, s, 2)
    left = (3 * f[2] - 4 * f[1] + f[0]) / (2 * h)
    assert got == pytest.approx(left, rel=1e-14)


def test_eno_collinearity():
    s = np.array([0.0, 1.0, 2.0])
    pts = np.array([[0.0, 0.0], [1.0, 0.2], [2.0, 0.0]])
    with pytest.raises(CollinearFeetRequired):
        eno_tangential_derivative(s, s, 1, points=pts)
