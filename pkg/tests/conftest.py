import numpy as np
import pytest

import particle_learning as pl
from particle_learning import _backend
from particle_learning.rng import stream

BACKENDS = _backend.available()


@pytest.fixture(params=BACKENDS)
def backend(request):
    prev = pl.set_backend(request.param)
    yield request.param
    pl.set_backend(prev)


@pytest.fixture
def rng():
    return stream(20240501)


@pytest.fixture
def local_level():
    return pl.LocalLevel(sigma2=1.0, tau2=0.5, m0=0.0, C0=100.0, x0=0.0)


def chi2_pvalue(counts, probs):
    from scipy import stats
    counts = np.asarray(counts, float)
    expected = counts.sum() * np.asarray(probs, float)
    return stats.chisquare(counts, expected).pvalue


ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = []


@pytest.fixture
def acceptance_log(request):
    return request.config.stash[ACCEPTANCE]


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
