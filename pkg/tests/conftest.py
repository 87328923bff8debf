import numpy as np
import pytest

from dipf.datasets import make_pair


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_pair():
    return make_pair(7, (48, 64))


@pytest.fixture(scope="session")
def textured():
    from scipy import ndimage

    r = np.random.default_rng(99)
    img = ndimage.gaussian_filter(r.random((64, 80)), 1.5)
    return (img - img.min()) / (img.max() - img.min())


def step_edge(shape=(64, 64), col=32, low=0.2, high=0.8):
    img = np.full(shape, low)
    img[:, col:] = high
    return img


def pytest_terminal_summary(terminalreporter):
    acceptance = terminalreporter.config.pluginmanager.get_plugin("test_acceptance")
    module = acceptance or __import__("sys").modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(module.RESULTS):
        terminalreporter.write_line(module.RESULTS[criterion])
