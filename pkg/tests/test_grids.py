import numpy as np
import pytest
from scipy.stats import norm

import randmisfit as rm


def test_two_point_trapezoid_matches_hand_rule():
    grid = rm.build_grid(1, [[-1, 1]], 2, "trapezoid")
    assert np.allclose(grid.nodes.reshape(-1), [-1.0, 1.0])
    assert np.allclose(grid.weights, [1.0, 1.0])
    assert abs(grid.weights.sum() - 2.0) <= 1e-10 * 2.0


@pytest.mark.parametrize("rule", ["trapezoid", "gauss_legendre"])
def test_unit_box_weights_sum_to_volume(rule):
    grid = rm.build_grid(2, [[0, 1], [0, 1]], 9, rule)
    assert abs(grid.weights.sum() - 1.0) <= 1e-10


def test_gauss_legendre_exact_for_quartic():
    # 5-node Gauss-Legendre integrates degree <= 9 exactly; the quartic
    # integral over [-1, 1] is 2/5.
    grid = rm.build_grid(1, [[-1, 1]], 5, "gauss_legendre")
    u = grid.nodes[:, 0]
    assert rm.integrate(u**4, grid) == pytest.approx(0.4, abs=1e-14)


def test_rejects_bad_inputs():
    with pytest.raises(ValueError):
        rm.build_grid(4, [[0, 1]] * 4, 3)
    with pytest.raises(ValueError):
        rm.build_grid(1, [[1, 1]], 3)
    with pytest.raises(ValueError):
        rm.build_grid(1, [[2, 1]], 3)
    with pytest.raises(ValueError):
        rm.build_grid(1, [[0, 1]], 1)
    with pytest.raises(ValueError):
        rm.build_grid(1, [[0, 1]], 3, "simpson")


@pytest.mark.parametrize("rule", ["trapezoid", "gauss_legendre"])
def test_nodes_inside_box_weights_positive(rule):
    grid = rm.build_grid(3, [[-1, 2], [0, 1], [-3, -1]], 4, rule)
    lo = np.array([-1.0, 0.0, -3.0])
    hi = np.array([2.0, 1.0, -1.0])
    assert np.all(grid.nodes >= lo - 1e-14) and np.all(grid.nodes <= hi + 1e-14)
    assert np.all(grid.weights > 0)


def test_integrate_constant_against_prior_mass():
    grid = rm.build_grid(1, [[-1, 1]], 33)
    prior = np.full(grid.size, 0.5)
    assert rm.integrate(np.ones(grid.size), grid, prior) == pytest.approx(1.0, abs=1e-12)


def test_integrate_gaussian_bump_against_cdf_oracle():
    # Oracle: 0.5 * integral of exp(-(0.5-u)^2/2) du over [-1, 1] equals
    # 0.5 * sqrt(2 pi) * (Phi(0.5) - Phi(-1.5)) via the normal CDF.
    oracle = 0.5 * np.sqrt(2 * np.pi) * (norm.cdf(0.5) - norm.cdf(-1.5))
    grid = rm.build_grid(1, [[-1, 1]], 201, "gauss_legendre")
    u = grid.nodes[:, 0]
    values = np.exp(-0.5 * (0.5 - u) ** 2)
    prior = np.full(grid.size, 0.5)
    assert rm.integrate(values, grid, prior) == pytest.approx(oracle, abs=1e-5)
    assert oracle == pytest.approx(0.782894, abs=1e-5)


def test_integrate_odd_function_vanishes():
    grid = rm.build_grid(1, [[-1, 1]], 41, "gauss_legendre")
    u = grid.nodes[:, 0]
    prior = np.full(grid.size, 0.5)
    assert abs(rm.integrate(u, grid, prior)) < 1e-15


def test_integrate_rejects_length_mismatch():
    grid = rm.build_grid(1, [[-1, 1]], 11)
    with pytest.raises(ValueError):
        rm.integrate(np.ones(10), grid)
    with pytest.raises(ValueError):
        rm.integrate(np.ones(11), grid, np.ones(10))


@pytest.mark.parametrize("rule", ["trapezoid", "gauss_legendre"])
def test_quadrature_consistency_under_refinement(rule):
    # Doubling the per-dimension node count moves a smooth integral by less
    # than the rule's configured refinement tolerance.
    def smooth_integral(nodes):
        grid = rm.build_grid(2, [[-1, 1], [0, 2]], nodes, rule)
        vals = np.exp(-np.sum(grid.nodes**2, axis=1))
        return rm.integrate(vals, grid)

    coarse, fine = smooth_integral(257), smooth_integral(514)
    assert abs(fine - coarse) < rm.grids.REFINEMENT_TOL[rule] * abs(fine)
