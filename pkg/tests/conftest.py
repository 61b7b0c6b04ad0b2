import numpy as np
import pytest

from leafvit.preprocess import Image


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def random_image(rng):
    def make(width, height):
        return Image(rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8))

    return make


def central_difference(f, x, step=1e-4):
    """Numerical gradient of scalar ``f`` with respect to array ``x`` (perturbed in place)."""
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        orig = x[i]
        x[i] = orig + step
        up = f()
        x[i] = orig - step
        down = f()
        x[i] = orig
        grad[i] = (up - down) / (2 * step)
    return grad


def rel_error(a, b):
    denom = max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return np.linalg.norm(a - b) / denom


_ACCEPTANCE = pytest.StashKey()


@pytest.fixture
def criterion(request):
    """Record one acceptance line; the outcome is filled in from the test report."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, {})

    def record(number, text):
        lines[request.node.nodeid] = [number, text, None]

    return record


@pytest.hookimpl(wrapper=True)
def pytest_runtest_makereport(item, call):
    report = yield
    lines = item.config.stash.get(_ACCEPTANCE, {})
    if item.nodeid in lines and report.when == "call":
        lines[item.nodeid][2] = report.passed
    return report


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, {})
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for number, text, passed in sorted(lines.values()):
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  criterion {number}: {text}")
