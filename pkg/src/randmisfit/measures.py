"""Probability measures on a grid, the Hellinger metric, and mixed norms.

Measures are stored in Radon-Nikodym form: a log-density with respect to a
base (prior) density plus a log-normalizer, so

    d(measure)/d(prior) = exp(log_density_wrt_prior - log_normalizer).

Keeping densities in log form defers exponentiation to integration time,
where a max-subtraction (log-sum-exp) keeps small normalizers from
underflowing.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import logsumexp

from .grids import GridSpace, integrate

# Mass below this (per node) is treated as zero when checking absolute
# continuity against a reference that vanishes there.
_AC_DUST = 1e-12


@dataclass(frozen=True)
class PriorDensity:
    """A probability density on the grid (values per node, 1/volume units)."""

    grid: GridSpace
    density: np.ndarray  # (size,)

    def mass(self) -> np.ndarray:
        """Per-node integration mass w_k * density_k."""
        return self.grid.weights * self.density


@dataclass(frozen=True)
class DensityMeasure:
    """A probability measure given by an unnormalized log-density w.r.t. a prior."""

    grid: GridSpace
    prior: PriorDensity
    log_density_wrt_prior: np.ndarray  # (size,)
    log_normalizer: float

    @property
    def normalizer(self) -> float:
        return math.exp(self.log_normalizer)

    def density_wrt_prior(self) -> np.ndarray:
        return np.exp(self.log_density_wrt_prior - self.log_normalizer)

    def lebesgue_density(self) -> np.ndarray:
        return self.density_wrt_prior() * self.prior.density

    def total_mass(self) -> float:
        return float(integrate(self.density_wrt_prior(), self.grid, self.prior.density))


def _check_prior(grid: GridSpace, density: np.ndarray, rtol: float = 1e-8) -> None:
    if density.shape != (grid.size,):
        raise ValueError("density must have one entry per node")
    if np.any(~np.isfinite(density)) or np.any(density < 0):
        raise ValueError("density values must be finite and nonnegative")
    total = float(integrate(density, grid))
    if abs(total - 1.0) > rtol:
        raise ValueError(f"density integrates to {total}, expected 1")


def uniform_prior(grid: GridSpace) -> PriorDensity:
    density = np.full(grid.size, 1.0 / grid.volume)
    _check_prior(grid, density)
    return PriorDensity(grid=grid, density=density)


def truncated_gaussian_prior(
    grid: GridSpace, mean: np.ndarray, sd: np.ndarray
) -> PriorDensity:
    """Diagonal Gaussian restricted to the box, renormalized by quadrature."""
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    sd = np.atleast_1d(np.asarray(sd, dtype=float))
    if mean.shape != (grid.dim,) or sd.shape != (grid.dim,):
        raise ValueError("mean and sd must have one entry per dimension")
    if np.any(sd <= 0):
        raise ValueError("sd must be strictly positive")
    z = (grid.nodes - mean) / sd
    raw = np.exp(-0.5 * np.sum(z * z, axis=1))
    density = raw / float(integrate(raw, grid))
    _check_prior(grid, density)
    return PriorDensity(grid=grid, density=density)


def normalize_log_density(
    log_density: np.ndarray, prior: PriorDensity
) -> DensityMeasure:
    """Turn an unnormalized log-density w.r.t. ``prior`` into a measure.

    The normalizer is the quadrature integral of exp(log_density) against the
    prior, evaluated by log-sum-exp. The prior must be strictly positive so
    that the representation covers the whole grid.
    """
    log_density = np.asarray(log_density, dtype=float)
    if log_density.shape != (prior.grid.size,):
        raise ValueError("log_density must have one entry per node")
    if np.any(np.isnan(log_density)) or np.any(log_density == np.inf):
        raise ValueError("log-density values must be < +inf and not NaN")
    if np.any(prior.density <= 0):
        raise ValueError("prior density must be strictly positive at every node")
    log_z = float(logsumexp(log_density + np.log(prior.mass())))
    return DensityMeasure(
        grid=prior.grid,
        prior=prior,
        log_density_wrt_prior=log_density,
        log_normalizer=log_z,
    )


def mixture_reference(mu: DensityMeasure, nu: DensityMeasure) -> PriorDensity:
    """The equal mixture (mu + nu)/2 as a reference density for the metric."""
    if not mu.grid.matches(nu.grid):
        raise ValueError("measures live on different grids")
    density = 0.5 * (mu.lebesgue_density() + nu.lebesgue_density())
    return PriorDensity(grid=mu.grid, density=density)


def hellinger(mu: DensityMeasure, nu: DensityMeasure, reference: PriorDensity) -> float:
    """Hellinger distance between two measures, computed against ``reference``.

    Returns sqrt( (1/2) * integral of |sqrt(d mu/d ref) - sqrt(d nu/d ref)|^2
    d ref ), which lies in [0, 1] and does not depend on the admissible
    choice of reference. Both measures must be absolutely continuous with
    respect to ``reference`` on the grid.
    """
    if not (mu.grid.matches(nu.grid) and mu.grid.matches(reference.grid)):
        raise ValueError("measures and reference live on different grids")
    a = mu.lebesgue_density()
    b = nu.lebesgue_density()
    r = reference.density
    if np.any(~np.isfinite(a)) or np.any(~np.isfinite(b)) or np.any(~np.isfinite(r)):
        raise ValueError("non-finite density values")
    support = r > 0
    off = ~support
    if np.any(a[off] > _AC_DUST) or np.any(b[off] > _AC_DUST):
        raise ValueError("measure not absolutely continuous w.r.t. reference")
    w = mu.grid.weights[support]
    rs = r[support]
    diff = np.sqrt(a[support] / rs) - np.sqrt(b[support] / rs)
    d2 = 0.5 * float(np.sum(w * rs * diff * diff))
    return math.sqrt(min(max(d2, 0.0), 1.0))


@dataclass(frozen=True)
class MixedNormSpec:
    """Exponents and sample budget for an expectation-then-Lq mixed norm.

    ``q_inner`` shapes the empirical expectation over realization streams,
    ``q_outer`` the Lq norm over the prior; ``math.inf`` selects a maximum in
    either slot. ``omega_samples`` is the number of realization streams the
    sample table must carry.
    """

    q_inner: float
    q_outer: float
    omega_samples: int

    def __post_init__(self) -> None:
        if not (self.q_inner >= 1 and self.q_outer >= 1):
            raise ValueError("exponents must be >= 1")
        if self.omega_samples < 1:
            raise ValueError("omega_samples must be >= 1")


def lq_norm(values: np.ndarray, q: float, grid: GridSpace, prior: PriorDensity) -> float:
    """L^q norm over the prior; q = inf is the maximum over supported nodes."""
    vals = np.abs(np.asarray(values, dtype=float))
    mass = prior.mass()
    if math.isinf(q):
        return float(np.max(vals[mass > 0]))
    return float(np.sum(mass * vals**q) ** (1.0 / q))


def mixed_norm(
    samples: np.ndarray,
    inner_map: Callable[[np.ndarray], np.ndarray],
    spec: MixedNormSpec,
    grid: GridSpace,
    prior: PriorDensity,
) -> float:
    """Empirical expectation over realization streams followed by an Lq norm.

    Parameters
    ----------
    samples : ndarray, shape (omega_samples, nodes)
        One row per realization stream, one column per grid node.
    inner_map : callable
        Vectorized scalar map applied to the samples before averaging.
    spec : MixedNormSpec
        For q_inner = 1 the inner stage is |mean of inner_map(samples)|;
        for finite q_inner > 1 it is (mean |inner_map|^q_inner)^(1/q_inner);
        q_inner = inf takes the maximum over streams. The outer stage is the
        L^{q_outer} norm against the prior, with q_outer = inf realized as
        the maximum over nodes.
    """
    table = np.asarray(samples, dtype=float)
    if table.ndim != 2 or table.shape != (spec.omega_samples, grid.size):
        raise ValueError(
            f"samples must have shape ({spec.omega_samples}, {grid.size}), "
            f"got {table.shape}"
        )
    f = np.asarray(inner_map(table), dtype=float)
    if f.shape != table.shape:
        raise ValueError("inner_map must preserve the sample table shape")
    if np.any(~np.isfinite(f)):
        raise ValueError("non-finite sample values")
    if math.isinf(spec.q_inner):
        inner = np.max(np.abs(f), axis=0)
    elif spec.q_inner == 1:
        inner = np.abs(np.mean(f, axis=0))
    else:
        inner = np.mean(np.abs(f) ** spec.q_inner, axis=0) ** (1.0 / spec.q_inner)
    return lq_norm(inner, spec.q_outer, grid, prior)
