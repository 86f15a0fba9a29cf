import math

import numpy as np
import pytest

import randmisfit as rm
from randmisfit.measures import MixedNormSpec


def _random_measure(prior, rng):
    log_density = rng.normal(size=prior.grid.size)
    return rm.normalize_log_density(log_density, prior)


@pytest.fixture(scope="module")
def line_prior():
    grid = rm.build_grid(1, [[-1, 1]], 61, "gauss_legendre")
    return rm.uniform_prior(grid)


def test_priors_integrate_to_one():
    grid = rm.build_grid(2, [[-1, 1], [0, 3]], 41, "gauss_legendre")
    uni = rm.uniform_prior(grid)
    assert uni.mass().sum() == pytest.approx(1.0, abs=1e-8)
    tg = rm.truncated_gaussian_prior(grid, mean=[0.0, 1.0], sd=[0.7, 1.2])
    assert tg.mass().sum() == pytest.approx(1.0, abs=1e-12)


def test_hellinger_identical_measures_is_zero(line_prior):
    mu = _random_measure(line_prior, np.random.default_rng(0))
    assert rm.hellinger(mu, mu, line_prior) == 0.0


def test_hellinger_disjoint_supports_is_one(line_prior):
    grid = line_prior.grid
    half = grid.size // 2
    left = np.full(grid.size, -np.inf)
    left[:half] = 0.0
    right = np.full(grid.size, -np.inf)
    right[half:] = 0.0
    mu = rm.normalize_log_density(left, line_prior)
    nu = rm.normalize_log_density(right, line_prior)
    assert rm.hellinger(mu, nu, line_prior) == pytest.approx(1.0, abs=1e-10)


def test_hellinger_gaussian_shift_closed_form():
    # Equal-variance Gaussians: d_H^2 = 1 - exp(-dm^2 / (8 sigma^2)); the
    # truncation to [-8, 9] leaves tail mass ~1e-15.
    grid = rm.build_grid(1, [[-8, 9]], 2049, "gauss_legendre")
    prior = rm.uniform_prior(grid)
    u = grid.nodes[:, 0]
    mu = rm.normalize_log_density(-0.5 * u**2, prior)
    nu = rm.normalize_log_density(-0.5 * (u - 1.0) ** 2, prior)
    oracle = math.sqrt(1.0 - math.exp(-1.0 / 8.0))
    assert rm.hellinger(mu, nu, prior) == pytest.approx(oracle, abs=1e-4)
    assert oracle == pytest.approx(0.342788, abs=1e-6)


def test_hellinger_reference_independence(line_prior):
    rng = np.random.default_rng(7)
    mu = _random_measure(line_prior, rng)
    nu = _random_measure(line_prior, rng)
    d_prior = rm.hellinger(mu, nu, line_prior)
    d_mix = rm.hellinger(mu, nu, rm.mixture_reference(mu, nu))
    assert abs(d_prior - d_mix) < 1e-10


def test_hellinger_metric_axioms_on_random_triples(line_prior):
    rng = np.random.default_rng(2024)
    for _ in range(100):
        mu = _random_measure(line_prior, rng)
        nu = _random_measure(line_prior, rng)
        pi = _random_measure(line_prior, rng)
        d_mn = rm.hellinger(mu, nu, line_prior)
        d_nm = rm.hellinger(nu, mu, line_prior)
        d_mp = rm.hellinger(mu, pi, line_prior)
        d_pn = rm.hellinger(pi, nu, line_prior)
        assert d_mn == pytest.approx(d_nm, abs=1e-12)
        assert 0.0 <= d_mn <= 1.0
        assert d_mn <= d_mp + d_pn + 1e-10


def test_hellinger_zero_iff_equal_densities(line_prior):
    rng = np.random.default_rng(5)
    mu = _random_measure(line_prior, rng)
    # same density, different but equivalent (shifted) log representation
    nu = rm.normalize_log_density(mu.log_density_wrt_prior + 3.0, line_prior)
    assert rm.hellinger(mu, nu, line_prior) < 1e-12
    other = _random_measure(line_prior, rng)
    assert rm.hellinger(mu, other, line_prior) > 1e-6


def test_hellinger_rejects_mismatched_grids(line_prior):
    other_grid = rm.build_grid(1, [[-1, 1]], 11)
    other_prior = rm.uniform_prior(other_grid)
    mu = _random_measure(line_prior, np.random.default_rng(0))
    nu = _random_measure(other_prior, np.random.default_rng(0))
    with pytest.raises(ValueError):
        rm.hellinger(mu, nu, line_prior)


def test_mixed_norm_constant_table(line_prior):
    grid = line_prior.grid
    samples = np.full((8, grid.size), 2.0)
    spec = MixedNormSpec(q_inner=1.0, q_outer=3.0, omega_samples=8)
    assert rm.mixed_norm(samples, lambda x: x, spec, grid, line_prior) == pytest.approx(
        2.0, abs=1e-12
    )


def test_mixed_norm_sup_norm_of_coordinate(line_prior):
    grid = line_prior.grid
    samples = grid.nodes[:, 0][None, :]
    spec = MixedNormSpec(q_inner=1.0, q_outer=math.inf, omega_samples=1)
    value = rm.mixed_norm(samples, lambda x: x, spec, grid, line_prior)
    assert value == pytest.approx(np.max(np.abs(grid.nodes[:, 0])), abs=1e-14)


def test_mixed_norm_two_outcome_oracle(line_prior):
    # Brute force over the two-outcome realization set: values +-a with equal
    # frequency, inner absolute value, both exponents 1 -> a.
    grid = line_prior.grid
    a = 0.37
    samples = np.vstack([np.full(grid.size, a), np.full(grid.size, -a)])
    spec = MixedNormSpec(q_inner=1.0, q_outer=1.0, omega_samples=2)
    value = rm.mixed_norm(samples, np.abs, spec, grid, line_prior)
    brute = np.mean([abs(a), abs(-a)])
    assert value == pytest.approx(brute, abs=1e-12)
    assert value == pytest.approx(a, abs=1e-12)


def test_mixed_norm_monotone_in_both_exponents(line_prior):
    # Jensen: with probability measures in both slots the norm is
    # non-decreasing in each exponent.
    grid = line_prior.grid
    rng = np.random.default_rng(11)
    exponents = [1.0, 1.5, 2.0, 4.0, math.inf]
    for _ in range(20):
        samples = rng.normal(size=(16, grid.size))
        values = {}
        for qi in exponents:
            for qo in exponents:
                spec = MixedNormSpec(qi, qo, 16)
                values[qi, qo] = rm.mixed_norm(samples, lambda x: x, spec, grid, line_prior)
        for qi_lo, qi_hi in zip(exponents, exponents[1:]):
            for qo in exponents:
                assert values[qi_lo, qo] <= values[qi_hi, qo] + 1e-12
        for qo_lo, qo_hi in zip(exponents, exponents[1:]):
            for qi in exponents:
                assert values[qi, qo_lo] <= values[qi, qo_hi] + 1e-12


def test_mixed_norm_validation(line_prior):
    grid = line_prior.grid
    with pytest.raises(ValueError):
        MixedNormSpec(0.5, 1.0, 4)
    with pytest.raises(ValueError):
        MixedNormSpec(1.0, 1.0, 0)
    spec = MixedNormSpec(1.0, 1.0, 4)
    with pytest.raises(ValueError):
        rm.mixed_norm(np.ones((3, grid.size)), lambda x: x, spec, grid, line_prior)
    bad = np.ones((4, grid.size))
    bad[0, 0] = np.nan
    with pytest.raises(ValueError):
        rm.mixed_norm(bad, lambda x: x, spec, grid, line_prior)
