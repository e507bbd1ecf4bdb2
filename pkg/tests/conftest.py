import math

import pytest

from esbgk_ilw.geometry import Interval
from esbgk_ilw.phase_mesh import PhaseMesh, SpatialGrid, VelocityGrid


def interval_mesh(n=32, nv=6, lo=-math.pi / 6, hi=math.pi / 6, walls=(-0.5, 0.5), sym="yz", vmax=8.0):
    """``n`` intervals on ``[lo, hi]`` padded by two nodes per side."""
    h = (hi - lo) / n
    grid = SpatialGrid(1, (lo - 2 * h,), (h,), (n + 5,))
    return PhaseMesh(grid, VelocityGrid.from_half_count(vmax, nv, sym), Interval(*walls))


@pytest.fixture
def mesh1d():
    return interval_mesh()


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE: dict[int, str] = {}


def record_criterion(number: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[number] = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
