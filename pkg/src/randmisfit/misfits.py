"""Random approximations of the quadratic data misfit.

Three families, all realized as pure functions of (family, omega_index):

* ``sketched_quadratic`` replaces the squared whitened residual norm by an
  average of N squared random projections, unbiased because the sketch
  vectors satisfy E[X] = 0 and E[X X^T] = I.
* ``perturbed_forward`` adds a smooth random field of sup-norm at most 1,
  scaled by c/sqrt(N), to the forward map before forming the misfit.
* ``direct_perturbation`` shifts the misfit itself by c/sqrt(N) times a
  zero-mean variate: a constant, an exactly Uniform(-1, 1) field, or an
  exactly standard-normal field for stress-testing unbounded-below misfits.

All randomness flows through label-derived streams, so every realization is
reproducible bit-for-bit from (stream_root, N, omega_index).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Any

import numpy as np

from .forward import ForwardModel, GaussianNoise, _as_points
from .streams import derive_stream

RADEMACHER = "rademacher"
ELL_SPARSE = "ell_sparse"
GAUSSIAN_SKETCH = "gaussian"
SKETCH_KINDS = (RADEMACHER, ELL_SPARSE, GAUSSIAN_SKETCH)

SKETCHED_QUADRATIC = "sketched_quadratic"
PERTURBED_FORWARD = "perturbed_forward"
DIRECT_PERTURBATION = "direct_perturbation"
FAMILY_KINDS = (SKETCHED_QUADRATIC, PERTURBED_FORWARD, DIRECT_PERTURBATION)

VARIANT_CONSTANT = "constant"
VARIANT_UNIFORM = "uniform"
VARIANT_GAUSSIAN = "gaussian"
DIRECT_VARIANTS = (VARIANT_CONSTANT, VARIANT_UNIFORM, VARIANT_GAUSSIAN)

_FIELD_ORDER = 3  # sinusoids per output component in the perturbation field


@dataclass(frozen=True)
class SketchDistribution:
    """An isotropic sketch law: E[X] = 0 and E[X X^T] = I componentwise.

    ``ell_sparse`` puts mass ell at zero and (1 - ell)/2 at each of
    +-(1 - ell)^(-1/2); ell = 0 recovers the Rademacher law.
    """

    kind: str
    ell: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in SKETCH_KINDS:
            raise ValueError(f"unknown sketch kind {self.kind!r}")
        if self.kind == ELL_SPARSE and not 0.0 <= self.ell < 1.0:
            raise ValueError("ell must lie in [0, 1)")


def _sketch_matrix(
    dist: SketchDistribution, shape: tuple[int, ...], stream: np.random.Generator
) -> np.ndarray:
    if dist.kind == GAUSSIAN_SKETCH:
        return stream.standard_normal(shape)
    signs = stream.integers(0, 2, size=shape) * 2.0 - 1.0
    if dist.kind == RADEMACHER:
        return signs
    keep = stream.random(shape) >= dist.ell
    return np.where(keep, signs / math.sqrt(1.0 - dist.ell), 0.0)


def sample_sketch(
    dist: SketchDistribution, d: int, stream: np.random.Generator
) -> np.ndarray:
    """Draw one d-vector with i.i.d. components from the sketch law."""
    if d < 1:
        raise ValueError("d must be >= 1")
    return _sketch_matrix(dist, (d,), stream)


def quadratic_misfit(
    forward_like: Any, noise: GaussianNoise, y: np.ndarray, u: Any
) -> float | np.ndarray:
    """The potential 0.5 * || gamma^(-1/2) (y - G(u)) ||^2 at one or many points."""
    y = np.asarray(y, dtype=float)
    if y.shape != (noise.dim,):
        raise ValueError(f"data vector has shape {y.shape}, expected ({noise.dim},)")
    g = forward_like(u)
    res = np.atleast_2d(np.asarray(g, dtype=float))
    if res.shape[-1] != noise.dim:
        raise ValueError("forward output dimension does not match the noise model")
    if np.any(~np.isfinite(res)):
        raise ValueError("non-finite forward evaluation")
    v = noise.whiten(y - res)
    out = 0.5 * np.sum(v * v, axis=-1)
    return float(out[0]) if np.ndim(g) == 1 else out


@dataclass(frozen=True)
class RandomMisfitFamily:
    """An N-indexed family of random misfit realizations.

    ``stream_root`` is (master_seed, *labels); together with N and an
    omega index it determines every draw. ``N`` is the fidelity parameter:
    sketched families average N projections, perturbation families scale
    their fields by scale/sqrt(N).
    """

    kind: str
    forward: ForwardModel
    noise: GaussianNoise
    y: np.ndarray
    sketch: SketchDistribution | None = None
    scale: float | None = None
    variant: str = VARIANT_UNIFORM
    N: int = 1
    stream_root: tuple = (0, "misfit")

    def at(self, n: int) -> "RandomMisfitFamily":
        """The same family at fidelity n."""
        if n < 1:
            raise ValueError("N must be >= 1")
        return replace(self, N=int(n))

    @property
    def certified_lower_bound(self) -> float | None:
        """A constant c0 with misfit >= -c0 for every realization, when one
        holds by construction (None otherwise)."""
        if self.kind in (SKETCHED_QUADRATIC, PERTURBED_FORWARD):
            return 0.0
        if self.variant == VARIANT_CONSTANT:
            return 0.0
        if self.variant == VARIANT_UNIFORM:
            return float(self.scale)
        return None


def misfit_family(
    kind: str,
    forward: ForwardModel,
    noise: GaussianNoise,
    y: Any,
    sketch: SketchDistribution | None = None,
    scale: float | None = None,
    variant: str = VARIANT_UNIFORM,
    N: int = 1,
    stream_root: tuple = (0, "misfit"),
) -> RandomMisfitFamily:
    """Validated constructor for :class:`RandomMisfitFamily`."""
    if kind not in FAMILY_KINDS:
        raise ValueError(f"unknown family kind {kind!r}")
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.shape != (noise.dim,) or forward.out_dim != noise.dim:
        raise ValueError("forward output, noise, and data dimensions must agree")
    if N < 1:
        raise ValueError("N must be >= 1")
    if kind == SKETCHED_QUADRATIC:
        if sketch is None:
            raise ValueError("sketched_quadratic requires a sketch distribution")
    else:
        if scale is None or scale < 0:
            raise ValueError(f"{kind} requires a nonnegative scale")
    if kind == DIRECT_PERTURBATION and variant not in DIRECT_VARIANTS:
        raise ValueError(f"unknown direct-perturbation variant {variant!r}")
    root = tuple(stream_root)
    if not root or isinstance(root[0], str):
        raise ValueError("stream_root must start with an integer master seed")
    return RandomMisfitFamily(
        kind=kind, forward=forward, noise=noise, y=y, sketch=sketch,
        scale=None if scale is None else float(scale),
        variant=variant, N=int(N), stream_root=root,
    )


def _family_stream(
    family: RandomMisfitFamily, omega_index: int, with_n: bool
) -> np.random.Generator:
    if omega_index < 0:
        raise ValueError("omega_index must be >= 0")
    seed, *labels = family.stream_root
    path: list = [*labels, family.kind]
    if with_n:
        path += ["N", family.N]
    path += ["omega", int(omega_index)]
    return derive_stream(seed, path)


# -- sketched quadratic -------------------------------------------------------


def _whitened_residual(family: RandomMisfitFamily, points: np.ndarray) -> np.ndarray:
    return family.noise.whiten(family.y - family.forward(points))


def _sketched_values(x: np.ndarray, v: np.ndarray) -> np.ndarray:
    # x: (N, d) sketch vectors; v: (K, d) whitened residuals
    proj = v @ x.T  # (K, N)
    return 0.5 * np.mean(proj * proj, axis=1)


def sketched_misfit(
    family: RandomMisfitFamily, omega_index: int, u: Any
) -> float | np.ndarray:
    """One realization of the sketched misfit (1/2N) sum_j (X_j . v(u))^2."""
    if family.kind != SKETCHED_QUADRATIC:
        raise ValueError("family is not sketched_quadratic")
    points, single = _as_points(u, family.forward.in_dim)
    stream = _family_stream(family, omega_index, with_n=True)
    x = _sketch_matrix(family.sketch, (family.N, family.noise.dim), stream)
    vals = _sketched_values(x, _whitened_residual(family, points))
    return float(vals[0]) if single else vals


# -- perturbed forward model --------------------------------------------------


def _field_coefficients(
    stream: np.random.Generator, d: int
) -> tuple[np.ndarray, np.ndarray]:
    raw = stream.uniform(-1.0, 1.0, size=(d, _FIELD_ORDER))
    phases = stream.uniform(0.0, 2.0 * np.pi, size=(d, _FIELD_ORDER))
    total = float(np.sum(np.abs(raw)))
    coeffs = raw / total if total > 0 else raw
    return coeffs, phases


def _field_values(
    coeffs: np.ndarray, phases: np.ndarray, points: np.ndarray
) -> np.ndarray:
    # Smooth field with sup_u ||field(u)||_2 <= sum |coeffs| <= 1.
    s = points.sum(axis=1)
    freqs = np.arange(1, _FIELD_ORDER + 1, dtype=float)
    waves = np.sin(freqs[None, :, None] * s[None, None, :] + phases[:, :, None])
    return np.einsum("ib,ibk->ki", coeffs, waves)


@dataclass(frozen=True)
class PerturbedForward:
    """A realized approximate forward map G(u) + amplitude * field(u)."""

    base: ForwardModel
    coeffs: np.ndarray
    phases: np.ndarray
    amplitude: float

    def deviation(self, u: Any) -> np.ndarray:
        points, single = _as_points(u, self.base.in_dim)
        dev = self.amplitude * _field_values(self.coeffs, self.phases, points)
        return dev[0] if single else dev

    def __call__(self, u: Any) -> np.ndarray:
        return self.base(u) + self.deviation(u)

    @property
    def in_dim(self) -> int:
        return self.base.in_dim

    @property
    def out_dim(self) -> int:
        return self.base.out_dim


def perturbed_forward(family: RandomMisfitFamily, omega_index: int) -> PerturbedForward:
    """One realization G_N = G + (scale/sqrt(N)) * field, ||field|| <= 1.

    The field is drawn from the omega stream alone, so at a fixed omega the
    deviation scales exactly like 1/sqrt(N) across fidelities.
    """
    if family.kind != PERTURBED_FORWARD:
        raise ValueError("family is not perturbed_forward")
    stream = _family_stream(family, omega_index, with_n=False)
    coeffs, phases = _field_coefficients(stream, family.forward.out_dim)
    amplitude = family.scale / math.sqrt(family.N)
    return PerturbedForward(
        base=family.forward, coeffs=coeffs, phases=phases, amplitude=amplitude
    )


# -- direct perturbation ------------------------------------------------------


def _direct_field(
    family: RandomMisfitFamily, omega_index: int, points: np.ndarray
) -> np.ndarray:
    stream = _family_stream(family, omega_index, with_n=False)
    s = points.sum(axis=1)
    if family.variant == VARIANT_CONSTANT:
        return np.ones(points.shape[0])
    if family.variant == VARIANT_UNIFORM:
        # Wrapped sawtooth: at each fixed u the marginal is exactly
        # Uniform(-1, 1) because the offset phase is Uniform[0, 1).
        phase = stream.random()
        rate = stream.uniform(0.5, 1.5)
        return 2.0 * np.mod(phase + rate * s, 1.0) - 1.0
    # Rotating Gaussian field: z1 cos(a) + z2 sin(a) is N(0, 1) for every
    # deterministic angle a, giving an exactly standard-normal marginal.
    z = stream.standard_normal(2)
    angle = np.pi * s
    return z[0] * np.cos(angle) + z[1] * np.sin(angle)


def direct_perturbation_misfit(
    family: RandomMisfitFamily, omega_index: int, u: Any
) -> float | np.ndarray:
    """One realization of the shifted misfit Phi + (scale/sqrt(N)) * eta."""
    if family.kind != DIRECT_PERTURBATION:
        raise ValueError("family is not direct_perturbation")
    points, single = _as_points(u, family.forward.in_dim)
    base = quadratic_misfit(family.forward, family.noise, family.y, points)
    eta = _direct_field(family, omega_index, points)
    vals = base + (family.scale / math.sqrt(family.N)) * eta
    return float(vals[0]) if single else vals


# -- generic realization access ----------------------------------------------


def misfit_realization(family: RandomMisfitFamily, omega_index: int):
    """A callable u -> misfit values for one realization of the family."""
    if family.kind == SKETCHED_QUADRATIC:
        stream = _family_stream(family, omega_index, with_n=True)
        x = _sketch_matrix(family.sketch, (family.N, family.noise.dim), stream)

        def phi(u: Any) -> float | np.ndarray:
            points, single = _as_points(u, family.forward.in_dim)
            vals = _sketched_values(x, _whitened_residual(family, points))
            return float(vals[0]) if single else vals

        return phi
    if family.kind == PERTURBED_FORWARD:
        realized = perturbed_forward(family, omega_index)

        def phi(u: Any) -> float | np.ndarray:
            return quadratic_misfit(realized, family.noise, family.y, u)

        return phi

    def phi(u: Any) -> float | np.ndarray:
        return direct_perturbation_misfit(family, omega_index, u)

    return phi


def misfit_table(
    family: RandomMisfitFamily, omega_count: int, points: np.ndarray
) -> np.ndarray:
    """Misfit realizations for omega indices 0..omega_count-1 at given points.

    Returns an (omega_count, n_points) array; row k is realization k. Shared
    per-family quantities (residuals, base misfits) are computed once.
    """
    if omega_count < 1:
        raise ValueError("omega_count must be >= 1")
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != family.forward.in_dim:
        raise ValueError("points must be an (n, dim) array")
    if family.kind == SKETCHED_QUADRATIC:
        v = _whitened_residual(family, pts)
        rows = []
        for k in range(omega_count):
            stream = _family_stream(family, k, with_n=True)
            x = _sketch_matrix(family.sketch, (family.N, family.noise.dim), stream)
            rows.append(_sketched_values(x, v))
        return np.stack(rows, axis=0)
    if family.kind == PERTURBED_FORWARD:
        return perturbed_tables(family, omega_count, pts)[0]
    base = quadratic_misfit(family.forward, family.noise, family.y, pts)
    amp = family.scale / math.sqrt(family.N)
    rows = [base + amp * _direct_field(family, k, pts) for k in range(omega_count)]
    return np.stack(rows, axis=0)


def perturbed_tables(
    family: RandomMisfitFamily, omega_count: int, points: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Misfit and forward-error tables for a perturbed_forward family.

    Both tables use the same realization per row: entry (k, i) of the second
    table is ||G(u_i) - G_N(omega_k, u_i)||_2.
    """
    if family.kind != PERTURBED_FORWARD:
        raise ValueError("family is not perturbed_forward")
    pts = np.asarray(points, dtype=float)
    base_out = family.forward(pts)
    res = family.y - base_out  # (K, d)
    amp = family.scale / math.sqrt(family.N)
    misfit_rows = []
    err_rows = []
    for k in range(omega_count):
        stream = _family_stream(family, k, with_n=False)
        coeffs, phases = _field_coefficients(stream, family.forward.out_dim)
        dev = amp * _field_values(coeffs, phases, pts)
        v = family.noise.whiten(res - dev)
        misfit_rows.append(0.5 * np.sum(v * v, axis=1))
        err_rows.append(np.linalg.norm(dev, axis=1))
    return np.stack(misfit_rows, axis=0), np.stack(err_rows, axis=0)
