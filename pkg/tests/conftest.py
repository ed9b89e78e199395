import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=60, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

from sgproc.cir import CirParams  # noqa: E402
from sgproc.sgmodel import ModelParams  # noqa: E402

#: parameter sets of the replicated re-estimation study, (lambda, K, sigma)
ROW1 = CirParams(0.5, 5.0, 0.1)
ROW3 = CirParams(3.0, 5.0, 0.1)
ROW4 = CirParams(3.0, 5.0, 0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def row1_model():
    return ModelParams(ROW1, 0.5, 0.01)


#: one line per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
