import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from geoknot.lattice import LatticePolygon, make_rng, pivot_move  # noqa: E402
from geoknot.sampler import BiasSpec, ChainConfig, ChainState  # noqa: E402

TREFOIL_PD = [(1, 5, 2, 4), (3, 1, 4, 6), (5, 3, 6, 2)]
FIGURE_EIGHT_PD = [(4, 2, 5, 1), (8, 6, 1, 5), (6, 3, 7, 4), (2, 7, 3, 8)]

# pass/fail lines from the acceptance suite, echoed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


def parametric(kind, n=100):
    t = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    if kind == "trefoil":
        return np.c_[np.sin(t) + 2 * np.sin(2 * t), np.cos(t) - 2 * np.cos(2 * t), -np.sin(3 * t)]
    if kind == "figure8":
        return np.c_[(2 + np.cos(2 * t)) * np.cos(3 * t), (2 + np.cos(2 * t)) * np.sin(3 * t),
                     np.sin(4 * t)]
    if kind == "unknot":
        return np.c_[np.cos(t), np.sin(t), 0.3 * np.sin(2 * t)]
    raise ValueError(kind)


@pytest.fixture
def trefoil_curve():
    return parametric("trefoil")


@pytest.fixture
def figure8_curve():
    return parametric("figure8")


@pytest.fixture
def unknot_curve():
    return parametric("unknot")


def random_lattice_polygon(seed, n, pivots=20):
    """Lattice polygon of length ``n`` grown by BFACF from the square, then pivoted."""
    cfg = ChainConfig(knot="0_1", target_n=n, count=1, bias=BiasSpec("none"), seed=seed,
                      pivot_batch=0)
    state = ChainState(cfg)
    state.bfacf_sweep(50 * n)
    while state.n != n:
        state.bfacf_sweep(10)
    poly = state.polygon
    rng = make_rng(seed, 0, 99)
    for _ in range(pivots):
        pivot_move(poly, rng)
    return LatticePolygon(poly.vertices)
