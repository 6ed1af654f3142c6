"""Shared fixtures: the two workhorse reference measures and their grids."""

import numpy as np
import pytest

from aniso_shift import Potential, Side, build_grid, solve

MARKOV_P = np.array([[0.7, 0.3], [0.4, 0.6]])


@pytest.fixture(scope="session")
def uniform_plus():
    return Potential.uniform(Side.PLUS, 2)


@pytest.fixture(scope="session")
def uniform_minus():
    return Potential.uniform(Side.MINUS, 2)


@pytest.fixture(scope="session")
def markov_plus():
    return Potential.markov(Side.PLUS, MARKOV_P)


@pytest.fixture(scope="session")
def uniform_data(uniform_plus):
    return solve(uniform_plus, 8)


@pytest.fixture(scope="session")
def uniform_minus_data(uniform_minus):
    return solve(uniform_minus, 8)


@pytest.fixture(scope="session")
def markov_data(markov_plus):
    return solve(markov_plus, 8)


@pytest.fixture(scope="session")
def uniform_grid(uniform_data):
    return build_grid(uniform_data)


@pytest.fixture(scope="session")
def uniform_minus_grid(uniform_minus_data):
    return build_grid(uniform_minus_data)


@pytest.fixture(scope="session")
def markov_grid(markov_data):
    return build_grid(markov_data)
