import numpy as np
import pytest

from dynprice.demand import DemandModel, Scenario

CASE1_MODELS = (DemandModel.linear(1.4, -0.9), DemandModel.linear(0.8, -0.3))
CASE2_MODELS = (DemandModel.logistic(-10.0, 10.0), DemandModel.logistic(-1.0, 0.5))
N4_MODELS = (
    DemandModel.linear(0.62, -0.48),
    DemandModel.linear(1.25, -0.78),
    DemandModel.linear(0.77, -0.44),
    DemandModel.linear(1.45, -0.79),
)


@pytest.fixture(scope="session")
def case1():
    return Scenario.build(CASE1_MODELS, (0.5, 1.5))


@pytest.fixture(scope="session")
def case2():
    return Scenario.build(CASE2_MODELS, (0.0, 4.0))


@pytest.fixture(scope="session")
def n4():
    return Scenario.build(N4_MODELS, (0.5, 1.5))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line per acceptance criterion and return the verdict."""

    def emit(name, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
