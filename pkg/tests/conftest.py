import numpy as np
import pytest

from rwre import env as E


@pytest.fixture
def lazy():
    return E.lazy_nn()


@pytest.fixture
def onetwo():
    return E.one_two_jump()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[k])
