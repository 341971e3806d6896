import json
import math

import numpy as np
import pytest

from fejerlab import geometry, harness, iterations

# pass/fail lines of the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


def orthant2_instance():
    return geometry.ProblemInstance(
        (geometry.HalfSpace([1.0, 0.0], 0.0), geometry.HalfSpace([0.0, 1.0], 0.0)),
        [1.0, 1.0], [0.0, 0.0], 2, "orthant2")


def wedge_instance(theta, x0=(1.0, 0.5)):
    return geometry.ProblemInstance(
        (geometry.HalfSpace([0.0, 1.0], 0.0), geometry.HalfSpace([math.sin(theta), -math.cos(theta)], 0.0)),
        list(x0), [0.0, 0.0], 2, f"wedge({theta:.4f})")


def nonfejer_instance():
    raw = json.loads(harness.bundled_config_path("nonfejer").read_text())
    return geometry.ProblemInstance.from_dict(raw["instance"])


@pytest.fixture
def orthant2():
    return orthant2_instance()


@pytest.fixture
def orthant2_trace(orthant2):
    return iterations.run_dykstra(orthant2, 200)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
