import numpy as np
import pytest

from chernflow.models import HopfModel, cosine_torus, flat_torus, hopf_metric, torus_metric


@pytest.fixture
def rng():
    return np.random.default_rng(20261018)


@pytest.fixture(params=[2, 3], ids=lambda n: f"n{n}")
def hopf(request):
    return HopfModel(request.param)


@pytest.fixture
def hopf2():
    return hopf_metric(HopfModel(2))


@pytest.fixture
def flat2():
    return torus_metric(flat_torus(2))


@pytest.fixture
def wavy2():
    """Non-Kahler n = 2 torus metric with closed-form jets."""
    return torus_metric(cosine_torus(2, 0.1, axis="x2"))


def torus_points(rng, n, k):
    return rng.uniform(0, 1, (k, n)) + 1j * rng.uniform(0, 1, (k, n))


ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def acceptance_report(request):
    """Collects one status line per acceptance criterion for the terminal summary."""
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, [])
    return lines.append


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
