import numpy as np
import pytest

from csfi.cnf import parse_formula
from csfi.generator import GenParams


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def default_params():
    return GenParams()


@pytest.fixture
def small_params():
    """Formulas small enough for the brute-force oracle."""
    return GenParams(
        pool=tuple("abcdefgh"), symbols_range=(3, 8), clauses_range=(2, 6), clause_cardinality=3
    )


def F(text):
    return parse_formula(text)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
