import numpy as np
import pytest

from sdfgen.mesh import box_mesh, icosphere, normalize_mesh
from sdfgen.sdf import mesh_to_sdf


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def unit_tri():
    return np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0]])


@pytest.fixture(scope="session")
def cube():
    return box_mesh([-0.45] * 3, [0.45] * 3)


@pytest.fixture(scope="session")
def icosphere_mesh():
    return normalize_mesh(icosphere(0.45, 3))


@pytest.fixture(scope="session")
def icosphere_grid(icosphere_mesh):
    return mesh_to_sdf(icosphere_mesh, 64)


def pytest_terminal_summary(terminalreporter):
    from acceptance_report import RESULTS, line

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        terminalreporter.write_line(line(n))
