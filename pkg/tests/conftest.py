import sys
import warnings
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from poreident.geometry import GeometryConfig, build_geometry, refine, triangulate  # noqa: E402
from poreident.stokes import FlowBCs, solve_stokes  # noqa: E402

H_COARSE = 0.0825  # coarse rung of the ladder; one refinement gives the basic mesh
H_SMALL = 0.15


@pytest.fixture(scope="session")
def default_config():
    return GeometryConfig()


@pytest.fixture(scope="session")
def rect_config():
    return GeometryConfig(obstacle_count=0)


@pytest.fixture(scope="session")
def small_mesh(default_config):
    return triangulate(build_geometry(default_config), H_SMALL)


@pytest.fixture(scope="session")
def small_flow(small_mesh):
    return solve_stokes(small_mesh, FlowBCs())


@pytest.fixture(scope="session")
def coarse_mesh(default_config):
    return triangulate(build_geometry(default_config), H_COARSE)


@pytest.fixture(scope="session")
def coarse_flow(coarse_mesh):
    return solve_stokes(coarse_mesh, FlowBCs())


@pytest.fixture(scope="session")
def basic_mesh(coarse_mesh):
    return refine(coarse_mesh)


@pytest.fixture(scope="session")
def basic_flow(basic_mesh):
    return solve_stokes(basic_mesh, FlowBCs())


@pytest.fixture(scope="session")
def rect_mesh(rect_config):
    return triangulate(build_geometry(rect_config), 0.1)


@pytest.fixture(scope="session")
def rect_flow(rect_mesh):
    return solve_stokes(rect_mesh, FlowBCs())


@pytest.fixture(scope="session")
def small_simulator(small_mesh, small_flow):
    from poreident.identification import BreakthroughSimulator
    from poreident.transport import TransportParams

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return BreakthroughSimulator(small_mesh, small_flow, TransportParams(T_end=20.0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
