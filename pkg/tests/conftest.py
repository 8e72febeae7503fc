import numpy as np
import pytest

from sgdreg.model import LinearProblem, NoisyObservation, build_toy_problem
from sgdreg.solvers import StepSchedule


@pytest.fixture
def unit_rows_2x2():
    """A = I_2, x_true = (1, 1), y = (1, 1)."""
    prob = LinearProblem(np.eye(2), np.ones(2), np.ones(2), np.zeros(2), "unit2")
    return prob, NoisyObservation.exact(prob), StepSchedule.for_problem(prob, 0.1, c0=1.0)


@pytest.fixture
def toy3():
    prob = build_toy_problem(3, 3, seed=3)
    return prob, NoisyObservation.exact(prob), StepSchedule.for_problem(prob, 0.3, c0=1.0)


_CRITERIA_KEY = pytest.StashKey[list]()


@pytest.fixture
def report_criterion(request):
    """Record and print one pass/fail line for an acceptance criterion."""

    def record(number: int, passed: bool, detail: str, seconds: float) -> None:
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'} ({seconds:.1f} s) {detail}"
        print(line)
        request.config.stash.setdefault(_CRITERIA_KEY, []).append((number, line))

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_CRITERIA_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
