import numpy as np
import pytest

from pmclab.fem import solve_fem
from pmclab.geometry import Domain2D
from pmclab.mesh import mesh_polar
from pmclab.metric import MetricSpec
from pmclab.nonlinearity import Nonlinearity
from pmclab.radial import solve_radial

WARP = MetricSpec(2, (0.0, 1.0, 0.0, -0.1))


@pytest.fixture(scope="session")
def cap():
    return solve_radial(MetricSpec.flat(2), Nonlinearity.constant(2.0), 0.6)


@pytest.fixture(scope="session")
def warped():
    return solve_radial(WARP, Nonlinearity.affine(2.0, 1.0), 0.6)


@pytest.fixture(scope="session")
def disk_fem():
    return solve_fem(mesh_polar(Domain2D.disk(0.6), 16, 64), Nonlinearity.constant(2.0))


@pytest.fixture(scope="session")
def ellipse_fem():
    return solve_fem(mesh_polar(Domain2D.ellipse(1.2, 0.8), 16, 64), Nonlinearity.constant(2.0))


def cap_profile(rho, R=0.6):
    return np.sqrt(1 - R**2) - np.sqrt(1 - np.asarray(rho) ** 2)


ACCEPTANCE_LINES = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line per acceptance criterion."""

    def record(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number:>2}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
