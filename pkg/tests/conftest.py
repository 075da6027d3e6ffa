import numpy as np
import pytest

from turbforward.pupil import build_pupil, build_zernike_stack


@pytest.fixture(scope="session")
def grid():
    return build_pupil(64)


@pytest.fixture(scope="session")
def stack(grid):
    return build_zernike_stack(grid, 36)


@pytest.fixture(scope="session")
def camera():
    """Standard 256 x 256 test image in [0, 1]."""
    from skimage import data, transform

    return transform.resize(data.camera().astype(float) / 255.0, (256, 256), anti_aliasing=True)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_CRITERIA = []


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance" in report.nodeid:
        _CRITERIA.extend(line for line in report.capstdout.splitlines() if line.startswith("criterion "))


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERIA, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
