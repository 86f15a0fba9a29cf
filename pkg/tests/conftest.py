"""Shared reference problems.

TP1: scalar identity forward map, unit noise, y = 0.5, uniform prior on
[-1, 1]; its posterior is a truncated standard normal centered at 0.5.

TP2: scalar parameter with three observables (u, u^2, sin u), identity
noise, data at u = 0.3 plus a fixed offset; used for sketching sweeps.
"""
from __future__ import annotations

import numpy as np
import pytest

import randmisfit as rm

TP2_OFFSET = np.array([0.1, -0.05, 0.02])


def make_tp1(nodes: int = 201) -> rm.InverseProblem:
    grid = rm.build_grid(1, [[-1.0, 1.0]], nodes, "gauss_legendre")
    prior = rm.uniform_prior(grid)
    fwd = rm.affine_forward([[1.0]], [0.0])
    noise = rm.gaussian_noise([[1.0]])
    return rm.build_problem(grid, prior, fwd, noise, np.array([0.5]))


def tp2_forward() -> rm.ForwardModel:
    return rm.mixed_forward(
        [
            {"kind": "polynomial", "terms": [[1.0, [1]]]},
            {"kind": "polynomial", "terms": [[1.0, [2]]]},
            {"kind": "trigonometric", "terms": [[1.0, [1.0], 0.0]]},
        ],
        in_dim=1,
    )


def make_tp2(nodes: int = 65) -> rm.InverseProblem:
    grid = rm.build_grid(1, [[-1.0, 1.0]], nodes, "gauss_legendre")
    prior = rm.uniform_prior(grid)
    fwd = tp2_forward()
    noise = rm.gaussian_noise(np.eye(3))
    y = fwd(np.array([0.3])) + TP2_OFFSET
    return rm.build_problem(grid, prior, fwd, noise, y)


@pytest.fixture(scope="session")
def tp1() -> rm.InverseProblem:
    return make_tp1()


@pytest.fixture(scope="session")
def tp2() -> rm.InverseProblem:
    return make_tp2()


def tp2_sketched_family(problem: rm.InverseProblem, seed: int = 42) -> rm.RandomMisfitFamily:
    return rm.misfit_family(
        "sketched_quadratic",
        problem.forward,
        problem.noise,
        problem.y,
        sketch=rm.SketchDistribution("rademacher"),
        stream_root=(seed, "tp2"),
    )
