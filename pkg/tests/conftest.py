import numpy as np
import pytest

from rbffd.geometry import Disk, PolarCurve2D
from rbffd.nodes import generate_evaluation_set, generate_nodes
from rbffd.pipeline import METHODS, Discretization, prepare_nodes


@pytest.fixture(scope="session")
def star():
    return PolarCurve2D()


@pytest.fixture(scope="session")
def disk():
    return Disk()


@pytest.fixture(scope="session")
def star_nodes(star):
    """Small star node set (N about 250) and its q=3 evaluation set."""
    X = generate_nodes(star, 0.12, seed=0)
    Y = generate_evaluation_set(star, X, 3.0, seed=1)
    return X, Y


@pytest.fixture(scope="session")
def small_ls(star):
    X, Y = prepare_nodes(star, 0.12, 3.0, METHODS["ls"])
    return Discretization(star, X, Y, 3, METHODS["ls"])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def record(request):
    """Store one acceptance line: ``record(number, title, passed, detail)``."""
    log = request.config.stash.setdefault(_ACCEPTANCE, {})

    def _record(number, title, passed, detail=""):
        log[number] = (title, bool(passed), detail)
        print(f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {title}: {detail}")

    return _record


def pytest_terminal_summary(terminalreporter, config):
    log = config.stash.get(_ACCEPTANCE, {})
    if not log:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(log):
        title, passed, detail = log[number]
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {number:2d}. {title}: {detail}")
