import pytest

from orlicz_doubling.metric import DegeneracyProfile, MetricGrid


@pytest.fixture(scope="session")
def eucl_grid():
    return MetricGrid(1.0, 256, DegeneracyProfile.euclidean())


@pytest.fixture(scope="session")
def eucl_grid_512():
    return MetricGrid(1.0, 512, DegeneracyProfile.euclidean())


@pytest.fixture(scope="session")
def exp1_grid():
    return MetricGrid(1.0, 256, DegeneracyProfile.exp_power(1.0))


@pytest.fixture(scope="session")
def exp_half_grid():
    return MetricGrid(1.0, 256, DegeneracyProfile.exp_power(0.5))


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion; printed in the terminal summary."""

    def record(number: int, passed: bool, detail: str) -> None:
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
