import numpy as np
import pytest

from fedthresh.harness import ScenarioConfig

# one line per acceptance criterion, echoed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_config(**overrides) -> ScenarioConfig:
    """Small separable scenario that runs in well under a second."""
    base = dict(
        dataset={"kind": "synth", "num_normal": 600, "num_anomaly": 60,
                 "dim": 6, "separation": 6.0},
        num_clients=4, rounds=2, local_epochs=1, n_candidates=100,
        methods=("our_method", "largest_mse"), scenario_id="unit")
    base.update(overrides)
    return ScenarioConfig(**base)


@pytest.fixture
def small_config():
    return make_config()
