import numpy as np
import pytest

from minmaxlq.discretize import discretize_problem
from minmaxlq.model import load_problem, shipped_problem_path
from minmaxlq.solver import solve_minmax


@pytest.fixture(scope="session")
def ex1():
    return load_problem(shipped_problem_path("ex1"))


@pytest.fixture(scope="session")
def ex2():
    return load_problem(shipped_problem_path("ex2"))


@pytest.fixture(scope="session")
def ex1_disc(ex1):
    return discretize_problem(ex1)


@pytest.fixture(scope="session")
def ex2_disc(ex2):
    return discretize_problem(ex2)


@pytest.fixture(scope="session")
def ex1_solution(ex1, ex1_disc):
    return solve_minmax(ex1, ex1_disc)


@pytest.fixture(scope="session")
def ex2_solution(ex2, ex2_disc):
    return solve_minmax(ex2, ex2_disc)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_configure(config):
    config._acceptance_lines = []


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line for the end-of-run acceptance summary."""

    def record(criterion: str, ok: bool, detail: str) -> bool:
        request.config._acceptance_lines.append(f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
