from pathlib import Path

import numpy as np
import pytest

from ibpscopf.grid_model import load_case
from ibpscopf.oracle import random_case

CASES_DIR = Path(__file__).resolve().parents[1] / "docs" / "cases"
BUNDLED = ("ring3", "infeasible3", "tight2")

# acceptance lines collected by test_acceptance, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def bundled_path(name: str) -> Path:
    return CASES_DIR / f"{name}.json"


@pytest.fixture(scope="session")
def ring3():
    return load_case(bundled_path("ring3"))


@pytest.fixture(scope="session")
def infeasible3():
    return load_case(bundled_path("infeasible3"))


@pytest.fixture(scope="session")
def tight2():
    return load_case(bundled_path("tight2"))


@pytest.fixture(scope="session")
def bundled_cases():
    return [load_case(bundled_path(n)) for n in BUNDLED]


def sweep_cases(n_cases: int = 20):
    """Randomized cases spanning 2..30 buses, all non-islanding contingencies."""
    sizes = np.linspace(2, 30, n_cases).round().astype(int)
    return [random_case(int(n), 1.5, seed=100 + k) for k, n in enumerate(sizes)]


@pytest.fixture(scope="session")
def random_cases():
    return sweep_cases()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
