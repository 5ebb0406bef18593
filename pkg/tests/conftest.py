import pytest

from dlrcrit.problems import synthetic_problem


@pytest.fixture(scope="session")
def small_problem():
    return synthetic_problem(12, 6, seed=0)


@pytest.fixture(scope="session")
def medium_problem():
    return synthetic_problem(24, 8, seed=4)
