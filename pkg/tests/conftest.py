import numpy as np
import pytest

from plasmonls import DrudeLorentz, GridConfig, MediumModel, OperatorHandle, build_grids


@pytest.fixture
def drude():
    return DrudeLorentz.drude(1.0, 0.3)


@pytest.fixture
def one_voxel(drude):
    return MediumModel(np.array([[0.3, 0.0, 0.0]]), 0.3, drude)


@pytest.fixture
def two_voxels(drude):
    return MediumModel(np.array([[0.0, 0.0, 0.0], [0.3, 0.0, 0.0]]), 0.3, drude)


@pytest.fixture
def small_config():
    return GridConfig(4, 2, 2, 4, 6.0, 5.0, 0.5)


@pytest.fixture
def tiny_config():
    return GridConfig(3, 2, 2, 2, 6.0, 5.0, 0.5)


@pytest.fixture
def small_op(one_voxel, small_config):
    return OperatorHandle(one_voxel, build_grids(small_config, one_voxel))


ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = []
    config.addinivalue_line("markers", "acceptance: end-to-end acceptance criteria")


@pytest.fixture
def criterion(request):
    """Record one acceptance line; they are printed together in the terminal summary."""
    def record(number, title, ok, detail):
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {title}  ({detail})"
        request.config.stash[ACCEPTANCE].append((number, line))
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
