import numpy as np
import pytest
from hypothesis import settings

from symtransport.costs import SampledVectorField
from symtransport.measures import CouplingPlan, DiscreteMeasure

settings.register_profile("desk", max_examples=40, deadline=None)
settings.load_profile("desk")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_plan(rng, sizes):
    mass = rng.uniform(size=sizes)
    return CouplingPlan(mass / mass.sum())


def random_fields(rng, n, m, d=2):
    mu = DiscreteMeasure.uniform(rng.normal(size=(n, d)))
    return [SampledVectorField(mu, rng.normal(size=(n, d))) for _ in range(m - 1)]


ACCEPTANCE_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_LINES] = []


@pytest.fixture
def acceptance_log(request):
    return request.config.stash[ACCEPTANCE_LINES]


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
