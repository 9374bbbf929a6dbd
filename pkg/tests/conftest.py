import numpy as np
import pytest

from plane_sample import FeatureSchema, HierModel, Scenario, ScenarioSpace
from plane_sample.experiment import SyntheticConfig, synthetic_space
from plane_sample.hier_model import Grid


def make_toy_model(sigmas=(0.5, 2.0), rate=(0.1, 5.0, 8), count_cap=5, scale=5.0):
    """Two-point sigma grid, small log-spaced rate grid: small enough to enumerate."""
    sigma_grid = Grid(np.array(sigmas, dtype=float), np.ones(len(sigmas)))
    return HierModel(scale, sigma_grid, Grid.log_spaced(*rate), count_cap)


def make_toy_space(per_group=(2, 2)):
    """Scenarios ``0..n-1`` laid out group by group."""
    towns = tuple(f"T{k}" for k in range(len(per_group)))
    routes = tuple(str(r) for r in range(max(per_group)))
    schema = FeatureSchema((("town", towns), ("route", routes)), "town")
    scenarios, sid = [], 0
    for t, n in enumerate(per_group):
        for r in range(n):
            scenarios.append(Scenario(sid, (t, r)))
            sid += 1
    return ScenarioSpace(schema, tuple(scenarios))


@pytest.fixture(scope="session")
def default_model():
    return HierModel()


@pytest.fixture
def toy_model():
    return make_toy_model()


@pytest.fixture
def toy_space():
    return make_toy_space()


@pytest.fixture(scope="session")
def carla_space():
    return synthetic_space(SyntheticConfig())


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
