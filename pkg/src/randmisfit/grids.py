"""Tensor-product quadrature grids on compact boxes in one to three dimensions.

A grid carries per-dimension node/weight rules (trapezoid or Gauss-Legendre)
tensorized into flat arrays, so every integral over the box reduces to a
weighted sum over nodes.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

TRAPEZOID = "trapezoid"
GAUSS_LEGENDRE = "gauss_legendre"
RULES = (TRAPEZOID, GAUSS_LEGENDRE)

VOLUME_RTOL = 1e-10
MAX_DIM = 3

# Relative change allowed in a smooth integral when nodes_per_dim doubles.
# Gauss-Legendre is spectrally accurate; trapezoid is only second order, so
# its refinement tolerance is necessarily looser at desk-scale node counts.
REFINEMENT_TOL = {GAUSS_LEGENDRE: 1e-8, TRAPEZOID: 1e-5}


@dataclass(frozen=True)
class GridSpace:
    """Quadrature nodes and strictly positive weights on a box."""

    dim: int
    bounds: tuple[tuple[float, float], ...]
    nodes_per_dim: int
    rule: str
    axes: tuple[np.ndarray, ...]
    nodes: np.ndarray  # (size, dim)
    weights: np.ndarray  # (size,)

    @property
    def size(self) -> int:
        return self.nodes.shape[0]

    @property
    def volume(self) -> float:
        return float(np.prod([b - a for a, b in self.bounds]))

    @property
    def widths(self) -> np.ndarray:
        return np.array([b - a for a, b in self.bounds])

    def matches(self, other: "GridSpace") -> bool:
        """True when both grids hold identical nodes (same discretization)."""
        return (
            self.dim == other.dim
            and self.nodes.shape == other.nodes.shape
            and np.array_equal(self.nodes, other.nodes)
        )

    def contains(self, point: np.ndarray) -> bool:
        lo = np.array([a for a, _ in self.bounds])
        hi = np.array([b for _, b in self.bounds])
        return bool(np.all(point >= lo) and np.all(point <= hi))


def _axis_rule(a: float, b: float, n: int, rule: str) -> tuple[np.ndarray, np.ndarray]:
    if rule == TRAPEZOID:
        x = np.linspace(a, b, n)
        w = np.full(n, (b - a) / (n - 1))
        w[0] *= 0.5
        w[-1] *= 0.5
        return x, w
    t, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * t + 0.5 * (a + b), 0.5 * (b - a) * w


def build_grid(
    dim: int,
    bounds: Sequence[Sequence[float]],
    nodes_per_dim: int,
    rule: str = GAUSS_LEGENDRE,
) -> GridSpace:
    """Build a tensor quadrature grid on the box given by per-dimension bounds.

    Parameters
    ----------
    dim : int
        Parameter-space dimension, 1 to 3 (higher dimensions are rejected:
        dense tensor quadrature cost grows geometrically).
    bounds : sequence of (a, b) pairs
        One nonempty interval per dimension.
    nodes_per_dim : int
        Nodes per axis, at least 2.
    rule : str
        ``"trapezoid"`` or ``"gauss_legendre"``.
    """
    if not isinstance(dim, (int, np.integer)) or not 1 <= dim <= MAX_DIM:
        raise ValueError(f"dim must be an integer in [1, {MAX_DIM}], got {dim!r}")
    if len(bounds) != dim:
        raise ValueError(f"expected {dim} bound pairs, got {len(bounds)}")
    if nodes_per_dim < 2:
        raise ValueError("nodes_per_dim must be >= 2")
    if rule not in RULES:
        raise ValueError(f"unknown rule {rule!r}; expected one of {RULES}")

    clean_bounds = []
    for i, pair in enumerate(bounds):
        a, b = float(pair[0]), float(pair[1])
        if not (np.isfinite(a) and np.isfinite(b)) or a >= b:
            raise ValueError(f"degenerate interval [{a}, {b}] in dimension {i}")
        clean_bounds.append((a, b))

    axes = []
    axis_weights = []
    for a, b in clean_bounds:
        x, w = _axis_rule(a, b, nodes_per_dim, rule)
        axes.append(x)
        axis_weights.append(w)

    mesh = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([m.reshape(-1) for m in mesh], axis=1)
    wmesh = np.meshgrid(*axis_weights, indexing="ij")
    weights = np.ones(nodes.shape[0])
    for wm in wmesh:
        weights = weights * wm.reshape(-1)

    grid = GridSpace(
        dim=int(dim),
        bounds=tuple(clean_bounds),
        nodes_per_dim=int(nodes_per_dim),
        rule=rule,
        axes=tuple(axes),
        nodes=nodes,
        weights=weights,
    )
    _validate(grid)
    return grid


def _validate(grid: GridSpace) -> None:
    if np.any(grid.weights <= 0):
        raise ValueError("quadrature weights must be strictly positive")
    vol = grid.volume
    if abs(float(grid.weights.sum()) - vol) > VOLUME_RTOL * vol:
        raise ValueError("weights do not sum to the box volume")
    lo = np.array([a for a, _ in grid.bounds])
    hi = np.array([b for _, b in grid.bounds])
    if np.any(grid.nodes < lo - 1e-14) or np.any(grid.nodes > hi + 1e-14):
        raise ValueError("nodes fall outside the closed box")


def integrate(
    values: np.ndarray,
    grid: GridSpace,
    weight_density: np.ndarray | None = None,
) -> float | np.ndarray:
    """Quadrature integral sum_k w_k * values_k * weight_density_k.

    ``values`` may carry leading batch axes; the node axis is the last one.
    ``weight_density`` defaults to 1 (plain Lebesgue integral over the box).
    """
    vals = np.asarray(values, dtype=float)
    if vals.shape[-1:] != (grid.size,):
        raise ValueError(
            f"values have {vals.shape[-1] if vals.ndim else 0} entries per node, "
            f"grid has {grid.size} nodes"
        )
    mass = grid.weights
    if weight_density is not None:
        density = np.asarray(weight_density, dtype=float)
        if density.shape != (grid.size,):
            raise ValueError("weight_density must have one entry per node")
        if np.any(density < 0):
            raise ValueError("weight_density must be nonnegative")
        mass = mass * density
    out = vals @ mass
    return float(out) if np.ndim(out) == 0 else out
