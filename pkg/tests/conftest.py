import numpy as np
import pytest

from idledqn.objective import PenaltyModel, generate_quadratics
from idledqn.topology import WeightedGraph, default_radius, generate_rgg, metropolis_weights

ACCEPTANCE_LINES = []


def path3():
    return metropolis_weights(WeightedGraph(n=3, coords=np.zeros((3, 2)), edges=[(0, 1), (1, 2)]))


def k2():
    return metropolis_weights(WeightedGraph(n=2, coords=np.zeros((2, 2)), edges=[(0, 1)]))


def small_instance(n=10, p=5, seed=3, alpha_scale=100.0):
    g = metropolis_weights(generate_rgg(n, default_radius(n) * 1.3, seed))
    prob = generate_quadratics(n, p, seed)
    return PenaltyModel(prob, g, 1.0 / (alpha_scale * prob.L))


@pytest.fixture
def model10():
    return small_instance()


@pytest.fixture
def model20():
    return small_instance(n=20, p=10, seed=7)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
