import numpy as np
import pytest

from gtvr.src.data.splitters import partition
from gtvr.src.data.synthetic import synth_logistic, synth_quadratic
from gtvr.src.graph.topology import build_exponential, build_ring
from gtvr.src.graph.weights import build_mixing
from gtvr.src.model.objectives import LogisticObjective, QuadraticObjective


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def quadratic():
    return QuadraticObjective(synth_quadratic(5, [8] * 5, 4, seed=0))


@pytest.fixture
def logistic():
    samples = synth_logistic(24, 5, seed=0, separation=1.0)
    return LogisticObjective(partition(24, 4).apply(samples), lam=0.1)


@pytest.fixture
def exp5():
    return build_mixing(build_exponential(5))


@pytest.fixture
def ring4():
    return build_mixing(build_ring(4))


@pytest.fixture
def rng():
    return np.random.default_rng(0)
