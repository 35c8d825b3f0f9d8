from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from vdeffuant.opinions import (Boundary, Dynamics, InitSpec, LatticeSpec, ModelParams, hamming,
                                pile_pmf_biased, pile_pmf_uniform, popcount64, sample_configuration)

words = st.integers(min_value=0, max_value=2**64 - 1)


@given(words, words, words)
def test_hamming_is_a_metric(u, v, w):
    assert hamming(u, u) == 0
    assert hamming(u, v) == hamming(v, u)
    assert hamming(u, w) <= hamming(u, v) + hamming(v, w)


@given(st.lists(words, min_size=1, max_size=50))
def test_popcount64_matches_int_bit_count(values):
    arr = np.array(values, dtype=np.uint64)
    assert popcount64(arr).tolist() == [v.bit_count() for v in values]


@pytest.mark.parametrize("F,theta", [(0, 0), (65, 1), (3, 4), (3, -1)])
def test_model_params_rejects_out_of_range(F, theta):
    with pytest.raises(ValueError):
        ModelParams(F, theta)


def test_model_params_frozen_above():
    assert ModelParams(5, 2).frozen_above == 2
    assert ModelParams(5, 2, Dynamics.AXELROD).frozen_above == 4
    assert ModelParams(64, 3).mask == 2**64 - 1


def test_lattice_edges():
    assert LatticeSpec(10, Boundary.PERIODIC).edges == 10
    assert LatticeSpec(10, Boundary.FREE_INTERVAL).edges == 9
    with pytest.raises(ValueError):
        LatticeSpec(2)


def test_biased_measure_needs_small_polar_mass():
    InitSpec.biased(Fraction(1, 16)).validate(3)
    with pytest.raises(ValueError):
        InitSpec.biased(Fraction(1, 8)).validate(3)


def test_profile_probabilities_sum_to_one():
    for F in (1, 3, 6):
        for init in (InitSpec.uniform(), InitSpec.biased(Fraction(1, 2 ** (F + 2)))):
            assert sum(init.profile_probability(F, u) for u in range(2**F)) == 1


@pytest.mark.parametrize("F", [1, 5, 20, 64])
def test_pile_pmf_uniform_sums_to_one(F):
    assert sum(pile_pmf_uniform(F, j) for j in range(F + 1)) == 1


@pytest.mark.parametrize("F,rho", [(3, Fraction(1, 32)), (5, Fraction(1, 100)), (6, Fraction(0))])
def test_pile_pmf_biased_sums_to_one(F, rho):
    assert sum(pile_pmf_biased(F, 1, rho, j) for j in range(F + 1)) == 1
    assert all(pile_pmf_biased(F, 1, rho, j) >= 0 for j in range(F + 1))


@pytest.mark.parametrize("F", [1, 7, 63, 64])
def test_uniform_sample_stays_in_range(F, rng):
    x = sample_configuration(InitSpec.uniform(), F, 5000, rng)
    assert x.dtype == np.uint64
    if F < 64:
        assert int(x.max()) < 2**F
    # every bit is used
    bits = np.bitwise_or.reduce(x)
    assert int(bits) == (1 << F) - 1


def test_biased_sample_frequencies(rng):
    F, rho = 3, Fraction(1, 32)
    init = InitSpec.biased(rho)
    n = 200_000
    x = sample_configuration(init, F, n, rng)
    for u in (0, 7, 3):
        p = float(init.profile_probability(F, u))
        se = np.sqrt(p * (1 - p) / n)
        assert abs(np.mean(x == u) - p) < 5 * se
