"""Forward maps from parameter space to data space, and Gaussian noise models."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .grids import GridSpace

AFFINE = "affine"
POLYNOMIAL = "polynomial"
TRIGONOMETRIC = "trigonometric"
TABULATED = "tabulated"
MIXED = "mixed"
FORWARD_KINDS = (AFFINE, POLYNOMIAL, TRIGONOMETRIC, TABULATED, MIXED)

_ROOT_RTOL = 1e-10


@dataclass(frozen=True)
class GaussianNoise:
    """Centered Gaussian observation noise with covariance ``gamma``.

    ``gamma_inv_sqrt`` is the symmetric inverse square root, computed from the
    eigendecomposition so that gamma_inv_sqrt @ gamma @ gamma_inv_sqrt
    reproduces the identity to Frobenius tolerance 1e-10.
    """

    dim: int
    gamma: np.ndarray
    gamma_inv_sqrt: np.ndarray

    def whiten(self, residual: np.ndarray) -> np.ndarray:
        """Apply gamma^(-1/2) to residual vectors (last axis is data dim)."""
        return np.asarray(residual, dtype=float) @ self.gamma_inv_sqrt.T


def gaussian_noise(gamma: Sequence[Sequence[float]] | float) -> GaussianNoise:
    g = np.atleast_2d(np.asarray(gamma, dtype=float))
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ValueError("gamma must be a square matrix")
    if not np.allclose(g, g.T, atol=1e-12, rtol=0):
        raise ValueError("gamma must be symmetric")
    eigvals, eigvecs = np.linalg.eigh(g)
    if np.any(eigvals <= 0):
        raise ValueError("gamma must be positive definite")
    inv_sqrt = (eigvecs / np.sqrt(eigvals)) @ eigvecs.T
    d = g.shape[0]
    defect = inv_sqrt @ g @ inv_sqrt - np.eye(d)
    if float(np.linalg.norm(defect)) > _ROOT_RTOL:
        raise ValueError("inverse square root failed its identity check")
    return GaussianNoise(dim=d, gamma=g, gamma_inv_sqrt=inv_sqrt)


def _as_points(u: Any, dim: int) -> tuple[np.ndarray, bool]:
    """Coerce a point or an array of points to shape (n, dim)."""
    arr = np.asarray(u, dtype=float)
    if arr.ndim == 0:
        if dim != 1:
            raise ValueError(f"scalar input for a {dim}-dimensional parameter")
        return arr.reshape(1, 1), True
    if arr.ndim == 1:
        if arr.shape[0] == dim:
            return arr.reshape(1, dim), True
        if dim == 1:
            return arr.reshape(-1, 1), False
        raise ValueError(f"point has {arr.shape[0]} coordinates, expected {dim}")
    if arr.ndim == 2 and arr.shape[1] == dim:
        return arr, False
    raise ValueError(f"cannot interpret input of shape {arr.shape} as points in R^{dim}")


def _eval_polynomial(terms: tuple, points: np.ndarray) -> np.ndarray:
    out = np.zeros(points.shape[0])
    for coeff, powers in terms:
        out += coeff * np.prod(points ** np.asarray(powers, dtype=float), axis=1)
    return out


def _eval_trigonometric(terms: tuple, points: np.ndarray) -> np.ndarray:
    out = np.zeros(points.shape[0])
    for amp, freqs, phase in terms:
        out += amp * np.sin(points @ np.asarray(freqs, dtype=float) + phase)
    return out


@dataclass(frozen=True)
class ForwardModel:
    """A map from R^in_dim to R^out_dim given by one of a few closed families."""

    kind: str
    params: dict
    in_dim: int
    out_dim: int

    def __call__(self, u: Any) -> np.ndarray:
        points, single = _as_points(u, self.in_dim)
        out = self._evaluate(points)
        if np.any(~np.isfinite(out)):
            raise ValueError("forward model produced non-finite values")
        return out[0] if single else out

    def _evaluate(self, points: np.ndarray) -> np.ndarray:
        if self.kind == AFFINE:
            return points @ self.params["matrix"].T + self.params["offset"]
        if self.kind == POLYNOMIAL:
            cols = [_eval_polynomial(t, points) for t in self.params["components"]]
            return np.stack(cols, axis=1)
        if self.kind == TRIGONOMETRIC:
            cols = [_eval_trigonometric(t, points) for t in self.params["components"]]
            return np.stack(cols, axis=1)
        if self.kind == MIXED:
            cols = []
            for comp_kind, terms in self.params["components"]:
                if comp_kind == POLYNOMIAL:
                    cols.append(_eval_polynomial(terms, points))
                else:
                    cols.append(_eval_trigonometric(terms, points))
            return np.stack(cols, axis=1)
        # tabulated: multilinear interpolation of per-node values
        interps = self.params["interpolators"]
        return np.stack([np.asarray(f(points)) for f in interps], axis=1)


def affine_forward(matrix: Sequence, offset: Sequence | None = None) -> ForwardModel:
    """G(u) = matrix @ u + offset."""
    m = np.atleast_2d(np.asarray(matrix, dtype=float))
    d, p = m.shape
    off = np.zeros(d) if offset is None else np.asarray(offset, dtype=float)
    if off.shape != (d,):
        raise ValueError("offset length must match the output dimension")
    return ForwardModel(kind=AFFINE, params={"matrix": m, "offset": off}, in_dim=p, out_dim=d)


def _norm_poly_terms(component: Sequence, in_dim: int) -> tuple:
    terms = []
    for coeff, powers in component:
        powers = tuple(int(k) for k in np.atleast_1d(powers))
        if len(powers) != in_dim or any(k < 0 for k in powers):
            raise ValueError("each polynomial term needs one nonnegative power per dimension")
        terms.append((float(coeff), powers))
    return tuple(terms)


def _norm_trig_terms(component: Sequence, in_dim: int) -> tuple:
    terms = []
    for amp, freqs, phase in component:
        freqs = tuple(float(f) for f in np.atleast_1d(freqs))
        if len(freqs) != in_dim:
            raise ValueError("each sinusoid needs one frequency per dimension")
        terms.append((float(amp), freqs, float(phase)))
    return tuple(terms)


def polynomial_forward(components: Sequence, in_dim: int) -> ForwardModel:
    """Each output component is a multivariate polynomial: terms (coeff, powers)."""
    comps = tuple(_norm_poly_terms(c, in_dim) for c in components)
    return ForwardModel(
        kind=POLYNOMIAL, params={"components": comps}, in_dim=in_dim, out_dim=len(comps)
    )


def trigonometric_forward(components: Sequence, in_dim: int) -> ForwardModel:
    """Each output component is a sum of sinusoids: terms (amp, freqs, phase)."""
    comps = tuple(_norm_trig_terms(c, in_dim) for c in components)
    return ForwardModel(
        kind=TRIGONOMETRIC, params={"components": comps}, in_dim=in_dim, out_dim=len(comps)
    )


def mixed_forward(components: Sequence[dict], in_dim: int) -> ForwardModel:
    """Heterogeneous output components, each polynomial or trigonometric.

    ``components`` is a sequence of {"kind": ..., "terms": [...]} entries; this
    covers forward maps whose outputs mix the two families.
    """
    comps = []
    for spec in components:
        kind = spec["kind"]
        if kind == POLYNOMIAL:
            comps.append((POLYNOMIAL, _norm_poly_terms(spec["terms"], in_dim)))
        elif kind == TRIGONOMETRIC:
            comps.append((TRIGONOMETRIC, _norm_trig_terms(spec["terms"], in_dim)))
        else:
            raise ValueError(f"mixed components must be polynomial or trigonometric, got {kind!r}")
    return ForwardModel(
        kind=MIXED, params={"components": tuple(comps)}, in_dim=in_dim, out_dim=len(comps)
    )


def tabulated_forward(grid: GridSpace, values: np.ndarray) -> ForwardModel:
    """Forward map given by values at grid nodes, multilinearly interpolated."""
    vals = np.asarray(values, dtype=float)
    if vals.ndim == 1:
        vals = vals.reshape(-1, 1)
    if vals.shape[0] != grid.size:
        raise ValueError("values must have one row per grid node")
    if np.any(~np.isfinite(vals)):
        raise ValueError("tabulated values must be finite")
    shape = tuple(len(ax) for ax in grid.axes)
    interps = tuple(
        RegularGridInterpolator(
            grid.axes, vals[:, j].reshape(shape), method="linear",
            bounds_error=False, fill_value=None,
        )
        for j in range(vals.shape[1])
    )
    return ForwardModel(
        kind=TABULATED,
        params={"values": vals, "interpolators": interps},
        in_dim=grid.dim,
        out_dim=vals.shape[1],
    )
