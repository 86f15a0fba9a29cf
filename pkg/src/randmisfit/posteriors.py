"""Posterior construction from misfits, plus an independent MCMC cross-check.

The true posterior has density exp(-Phi)/Z with respect to the prior, where
Z is the quadrature integral of exp(-Phi) against the prior. Random
approximate posteriors apply the same normalization to one realization of a
random misfit family; the marginal approximate posterior averages
exp(-Phi_N) over realizations before normalizing, with the same realization
streams used for numerator and normalizer so the result is exactly
normalized on the grid.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.special import logsumexp

from .forward import ForwardModel, GaussianNoise
from .grids import GridSpace, integrate
from .measures import DensityMeasure, PriorDensity, normalize_log_density
from .misfits import RandomMisfitFamily, misfit_realization, misfit_table, quadratic_misfit
from .streams import derive_stream

Z_FLOOR = 1e-300


class DegeneratePosteriorError(ValueError):
    """Raised when the evidence underflows the positive floor."""


def normalize(
    misfit_values: np.ndarray, prior: PriorDensity, grid: GridSpace | None = None
) -> tuple[DensityMeasure, float]:
    """Build the measure with density exp(-misfit)/Z w.r.t. the prior.

    Returns the measure and the evidence Z, computed with log-sum-exp
    stabilization so large misfits do not underflow before integration.
    """
    grid = prior.grid if grid is None else grid
    if not grid.matches(prior.grid):
        raise ValueError("grid does not match the prior's grid")
    phi = np.asarray(misfit_values, dtype=float)
    if phi.shape != (grid.size,):
        raise ValueError("misfit_values must have one entry per node")
    if np.any(~np.isfinite(phi)):
        raise ValueError("misfit values must be finite")
    measure = normalize_log_density(-phi, prior)
    z = math.exp(measure.log_normalizer)
    if not z > Z_FLOOR:
        raise DegeneratePosteriorError(
            f"evidence {z!r} below floor {Z_FLOOR}; posterior is degenerate"
        )
    return measure, z


def approximate_posterior(
    family: RandomMisfitFamily,
    omega_index: int,
    N: int | None = None,
    prior: PriorDensity | None = None,
    grid: GridSpace | None = None,
) -> tuple[DensityMeasure, float]:
    """Posterior built from one realization of the family at fidelity N."""
    if prior is None:
        raise ValueError("prior is required")
    fam = family if N is None else family.at(N)
    grid = prior.grid if grid is None else grid
    phi_n = misfit_realization(fam, omega_index)(grid.nodes)
    return normalize(phi_n, prior, grid)


@dataclass(frozen=True)
class MarginalPosterior:
    """A realization-averaged posterior with its evidence statistics."""

    measure: DensityMeasure
    z_mean: float
    z_se: float


def marginal_posterior(
    family: RandomMisfitFamily,
    N: int | None = None,
    M: int = 1,
    prior: PriorDensity | None = None,
    grid: GridSpace | None = None,
) -> MarginalPosterior:
    """Posterior with density mean_omega exp(-Phi_N) / mean_omega Z_N.

    The same M realization streams feed the numerator and the evidence
    estimate, so the returned measure is exactly normalized on the grid. The
    standard error of the evidence estimate is reported alongside.
    """
    if prior is None:
        raise ValueError("prior is required")
    if M < 1:
        raise ValueError("M must be >= 1")
    fam = family if N is None else family.at(N)
    grid = prior.grid if grid is None else grid
    table = misfit_table(fam, M, grid.nodes)
    return marginal_from_table(table, prior, grid)


def marginal_from_table(
    table: np.ndarray, prior: PriorDensity, grid: GridSpace | None = None
) -> MarginalPosterior:
    """Marginal posterior from a precomputed (M, nodes) misfit table."""
    grid = prior.grid if grid is None else grid
    m = table.shape[0]
    log_num = logsumexp(-table, axis=0) - math.log(m)
    measure = normalize_log_density(log_num, prior)
    z_mean = math.exp(measure.log_normalizer)
    if not z_mean > Z_FLOOR:
        raise DegeneratePosteriorError("realization-averaged evidence below floor")
    log_mass = np.log(prior.mass())
    z_per_omega = np.exp(logsumexp(-table + log_mass[None, :], axis=1))
    z_se = float(np.std(z_per_omega, ddof=1) / math.sqrt(m)) if m > 1 else 0.0
    return MarginalPosterior(measure=measure, z_mean=z_mean, z_se=z_se)


def moments(measure: DensityMeasure) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature mean and per-dimension variance under the measure."""
    dens = measure.density_wrt_prior() * measure.prior.density
    mean = np.array(
        [integrate(measure.grid.nodes[:, i] * dens, measure.grid)
         for i in range(measure.grid.dim)]
    )
    var = np.array(
        [integrate((measure.grid.nodes[:, i] - mean[i]) ** 2 * dens, measure.grid)
         for i in range(measure.grid.dim)]
    )
    return mean, var


# -- random-walk Metropolis cross-check ---------------------------------------


@dataclass(frozen=True)
class ChainOutput:
    """A Metropolis chain with its accept tally, so the rate is always
    consistent with what was recorded."""

    samples: np.ndarray  # (n, dim)
    accepted: int
    proposed: int
    seed_label: str

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.proposed if self.proposed else 0.0


def _log_density_interpolator(measure: DensityMeasure):
    shape = tuple(len(ax) for ax in measure.grid.axes)
    log_vals = measure.log_density_wrt_prior + np.log(measure.prior.density)
    return RegularGridInterpolator(
        measure.grid.axes, log_vals.reshape(shape), method="linear",
        bounds_error=False, fill_value=None,
    )


def mh_sample(
    target: DensityMeasure,
    steps: int,
    step_size: float | np.ndarray | None = None,
    seed: int = 0,
    labels: tuple = ("mh",),
    burn: int | None = None,
) -> ChainOutput:
    """Random-walk Metropolis targeting the measure's density on the box.

    The target log-density is the multilinear interpolation of the grid
    values; proposals falling outside the box are rejected. ``step_size``
    defaults to half the box width per dimension. The first ``burn`` states
    (default: 10% of steps) are discarded from the returned samples but the
    acceptance tally covers every proposal.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    grid = target.grid
    widths = grid.widths
    if step_size is None:
        step = 0.5 * widths
    else:
        step = np.broadcast_to(np.asarray(step_size, dtype=float), (grid.dim,)).copy()
        if np.any(step <= 0):
            raise ValueError("step_size must be positive")
    if burn is None:
        burn = steps // 10
    lo = np.array([a for a, _ in grid.bounds])
    hi = np.array([b for _, b in grid.bounds])
    logpdf = _log_density_interpolator(target)
    stream = derive_stream(seed, labels)

    x = lo + 0.5 * widths
    logp = float(logpdf(x)[0])
    chain = np.empty((steps, grid.dim))
    accepted = 0
    for i in range(steps):
        prop = x + step * stream.standard_normal(grid.dim)
        if np.all(prop >= lo) and np.all(prop <= hi):
            logp_prop = float(logpdf(prop)[0])
            if math.log(stream.random()) <= logp_prop - logp:
                x, logp = prop, logp_prop
                accepted += 1
        chain[i] = x
    rate = accepted / steps
    if not 0.1 <= rate <= 0.9:
        warnings.warn(f"acceptance rate {rate:.3f} outside [0.1, 0.9]", stacklevel=2)
    label = f"{seed}:" + "/".join(str(lab) for lab in labels)
    return ChainOutput(
        samples=chain[burn:], accepted=accepted, proposed=steps, seed_label=label
    )


def batch_means_se(values: np.ndarray) -> float:
    """Effective standard error of a chain mean via sqrt(n) batch means."""
    vals = np.asarray(values, dtype=float).reshape(-1)
    n = vals.size
    if n < 4:
        raise ValueError("need at least 4 values")
    b = int(math.sqrt(n))
    nb = n // b
    batches = vals[: nb * b].reshape(nb, b).mean(axis=1)
    return float(np.std(batches, ddof=1) / math.sqrt(nb))


# -- problem bundle ------------------------------------------------------------


@dataclass(frozen=True)
class InverseProblem:
    """A grid-discretized inverse problem with its true posterior cached."""

    grid: GridSpace
    prior: PriorDensity
    forward: ForwardModel
    noise: GaussianNoise
    y: np.ndarray
    misfit_values: np.ndarray
    posterior: DensityMeasure
    z: float


def build_problem(
    grid: GridSpace,
    prior: PriorDensity,
    forward: ForwardModel,
    noise: GaussianNoise,
    y: np.ndarray,
) -> InverseProblem:
    y = np.asarray(y, dtype=float).reshape(-1)
    phi = quadratic_misfit(forward, noise, y, grid.nodes)
    posterior, z = normalize(phi, prior, grid)
    return InverseProblem(
        grid=grid, prior=prior, forward=forward, noise=noise, y=y,
        misfit_values=phi, posterior=posterior, z=z,
    )


@dataclass(frozen=True)
class PosteriorBundle:
    """True, per-realization, and realization-averaged posteriors together."""

    true_posterior: DensityMeasure
    z: float
    realizations: tuple[tuple[int, DensityMeasure, float], ...]
    marginal: MarginalPosterior | None


def build_bundle(
    problem: InverseProblem,
    family: RandomMisfitFamily,
    N: int | None = None,
    M: int = 1,
) -> PosteriorBundle:
    """Assemble the posterior bundle for omega indices 0..M-1."""
    fam = family if N is None else family.at(N)
    realizations = []
    for k in range(M):
        measure, z_n = approximate_posterior(fam, k, prior=problem.prior)
        realizations.append((k, measure, z_n))
    marg = marginal_posterior(fam, M=M, prior=problem.prior)
    return PosteriorBundle(
        true_posterior=problem.posterior,
        z=problem.z,
        realizations=tuple(realizations),
        marginal=marg,
    )
