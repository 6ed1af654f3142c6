import math

import numpy as np
import pytest

from aniso_shift import (
    BilateralPotential,
    Potential,
    Side,
    birkhoff_branch_sum,
    coboundary_residual,
    max_ergodic_average,
    normalize_pressure,
    reduce_to_one_sided,
)
from aniso_shift.potentials import max_periodic_average
from tests.conftest import MARKOV_P


def dyadic_table(rng, size, denom=1024, lo=-2, hi=2):
    # exactly representable values keep float sums exact in the shift tests
    return rng.integers(lo * denom, hi * denom, size=size) / denom


def test_birkhoff_constant():
    psi = Potential.constant(Side.PLUS, 0.37, 2)
    assert birkhoff_branch_sum(psi, (0, 1, 1, 0), (0,)) == pytest.approx(4 * 0.37, abs=0)


def test_birkhoff_range_two_hand_example():
    # a(00)=1 a(01)=2 a(10)=3 a(11)=4; branch word 01 over x = 00...
    psi = Potential(Side.PLUS, 2, np.array([1.0, 2.0, 3.0, 4.0]))
    assert birkhoff_branch_sum(psi, (0, 1), (0,)) == 5.0


def test_birkhoff_empty_word():
    psi = Potential(Side.PLUS, 2, np.array([1.0, 2.0, 3.0, 4.0]))
    assert birkhoff_branch_sum(psi, (), (0, 0)) == 0.0


def test_minus_side_canonical_table():
    # table over (x_{-2}, x_{-1}); canonical digits are reversed
    psi = Potential(Side.MINUS, 2, np.array([10.0, 20.0, 30.0, 40.0]))
    # canonical prefix (x_{-1}, x_{-2}) = (0, 1) means x_{-2}=1, x_{-1}=0 -> table[(1,0)] = 30
    assert psi.value((0, 1)) == 30.0


def test_normalize_constant_zero_becomes_log_half():
    psi = Potential.constant(Side.PLUS, 0.0, 2)
    out = normalize_pressure(psi, 4)
    np.testing.assert_allclose(out.table, -np.log(2), atol=1e-12)


def test_normalize_already_normalized_unchanged():
    psi = Potential.uniform(Side.PLUS, 2)
    out = normalize_pressure(psi, 4)
    np.testing.assert_allclose(out.table, psi.table, atol=1e-12)


def test_normalize_markov_log_rows_pressure_zero():
    psi = Potential.markov(Side.PLUS, MARKOV_P)
    out = normalize_pressure(psi, 5)
    np.testing.assert_allclose(out.table, psi.table, atol=1e-10)


def test_normalize_idempotent():
    rng = np.random.default_rng(11)
    psi = Potential(Side.PLUS, 2, rng.normal(size=4))
    once = normalize_pressure(psi, 6)
    twice = normalize_pressure(once, 6)
    np.testing.assert_allclose(once.table, twice.table, atol=1e-10)


# -- cohomological reduction ---------------------------------------------------


def test_reduce_one_sided_input_passthrough():
    phi = BilateralPotential(0, 2, np.array([1.0, 2.0, 3.0, 4.0]))
    data = reduce_to_one_sided(phi)
    np.testing.assert_array_equal(data.phi_plus.table, phi.table)
    assert np.all(data.u_plus.table == 0.0)


def test_reduce_m1_k1_closed_form():
    # a(00)=1 a(01)=2 a(10)=3 a(11)=4 -> phi_plus = a(0,x0)+a(x0,x1)-a(0,x1)
    phi = BilateralPotential(1, 1, np.array([1.0, 2.0, 3.0, 4.0]))
    data = reduce_to_one_sided(phi)
    np.testing.assert_array_equal(data.phi_plus.table, [1.0, 1.0, 4.0, 4.0])
    assert coboundary_residual(data, phi) == 0.0


@pytest.mark.parametrize("m,k", [(1, 1), (1, 2), (2, 1), (2, 2)])
def test_reduce_random_dyadic_zero_residual(m, k):
    rng = np.random.default_rng(100 * m + k)
    phi = BilateralPotential(m, k, dyadic_table(rng, 2 ** (m + k)))
    data = reduce_to_one_sided(phi)
    assert coboundary_residual(data, phi) == 0.0
    assert data.phi_plus.range_ == m + k


def test_reduce_random_float_tiny_residual():
    rng = np.random.default_rng(5)
    phi = BilateralPotential(2, 2, rng.normal(size=16))
    data = reduce_to_one_sided(phi)
    assert coboundary_residual(data, phi) < 1e-12


# -- maximal ergodic averages ----------------------------------------------------


def test_max_ergodic_constant():
    psi = Potential.constant(Side.PLUS, -math.log(2), 2)
    assert max_ergodic_average(psi) == -math.log(2)


def test_max_ergodic_two_cycle():
    # a(00)=-1 a(01)=0 a(10)=0 a(11)=-2: the 01<->10 cycle averages to 0
    psi = Potential(Side.PLUS, 2, np.array([-1.0, 0.0, 0.0, -2.0]))
    assert max_ergodic_average(psi) == 0.0


def test_max_ergodic_markov_log_rows():
    psi = Potential.markov(Side.PLUS, MARKOV_P)
    assert max_ergodic_average(psi) == pytest.approx(math.log(0.7), abs=1e-15)


def test_max_ergodic_constant_shift_exact():
    rng = np.random.default_rng(9)
    for trial in range(5):
        psi = Potential(Side.PLUS, 2, dyadic_table(rng, 4))
        for c in (0.5, -0.25, 1.0):
            shifted = psi.shifted(c)
            assert max_ergodic_average(shifted) == max_ergodic_average(psi) + c


@pytest.mark.parametrize("n,r,count", [(2, 3, 10), (3, 2, 10)])
def test_max_ergodic_matches_periodic_bruteforce(n, r, count):
    rng = np.random.default_rng(1000 * n + r)
    for trial in range(count):
        side = Side.PLUS if trial % 2 == 0 else Side.MINUS
        psi = Potential(side, r, dyadic_table(rng, n**r))
        assert max_ergodic_average(psi) == max_periodic_average(psi, 8)
