#!/usr/bin/env python3
"""
Optimal-Transport Oracles
=========================

Exact reference computations the penalties and flows are checked against:

  - :class:`DiscreteMeasure`, finite weighted point clouds with a plain-text
    row format ``weight x1 ... xn``
  - :func:`exact_wp_discrete`, the Wasserstein-p distance between two small
    discrete measures solved as a linear program over couplings (HiGHS)
  - :func:`elliptic_metric_1d_grid`, the Wasserstein metric tensor
    ⟨σ, (−Δ_ρ)⁻¹ σ⟩ of a 1-D density on a grid, by cumulative quadrature
  - :func:`empirical_w1`, W1 between equal-size batches (sorted coupling in
    1-D, sliced over fixed equiangular directions in 2-D); differentiable in
    its first argument

Author: wprox developers
"""

import logging
from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy import optimize
from scipy.integrate import cumulative_trapezoid, trapezoid
from scipy.sparse import csc_matrix

from wprox import autodiff as ad
from wprox.autodiff import Operand
from wprox.exceptions import (
    ConfigurationError,
    InvalidInputError,
    NumericError,
    ScaleError,
    UnsupportedDimensionError,
    UsageError,
)

logger = logging.getLogger(__name__)

MAX_ORACLE_SUPPORT = 64
WEIGHT_TOLERANCE = 1e-12
DEFAULT_DIRECTIONS = 64


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """
    Σ_i w_i δ_{x_i}.

    Parameters
    ----------
    points : np.ndarray
        m×n support; a 1-D array is read as m points in ℝ.
    weights : np.ndarray
        Nonnegative, summing to 1 within 1e-12.
    """

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        points = np.asarray(self.points, dtype=np.float64)
        if points.ndim == 1:
            points = points.reshape(-1, 1)
        weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if points.ndim != 2 or points.shape[0] != weights.size or weights.size == 0:
            raise ConfigurationError(
                f"Measure needs m points and m weights, got {points.shape} and {weights.size}"
            )
        if not (np.all(np.isfinite(points)) and np.all(np.isfinite(weights))):
            raise InvalidInputError("Measure points and weights must be finite")
        if np.any(weights < 0):
            raise InvalidInputError(f"Weights must be nonnegative, got min {weights.min()}")
        if abs(weights.sum() - 1.0) > WEIGHT_TOLERANCE:
            raise InvalidInputError(f"Weights must sum to 1, got {weights.sum()!r}")
        positive = points[weights > 0]
        if len(np.unique(positive, axis=0)) != len(positive):
            raise InvalidInputError(
                "Duplicate support points with positive weight; build with from_points to merge"
            )
        points.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_points(cls, points: Any, weights: Any = None) -> "DiscreteMeasure":
        """Empirical measure; equal weights by default, duplicate points merged."""
        points = np.asarray(points, dtype=np.float64)
        if points.ndim == 1:
            points = points.reshape(-1, 1)
        m = points.shape[0]
        w = np.full(m, 1.0 / m) if weights is None else np.asarray(weights, dtype=np.float64)
        unique, inverse = np.unique(points, axis=0, return_inverse=True)
        merged = np.bincount(inverse.reshape(-1), weights=w, minlength=len(unique))
        return cls(unique, merged / merged.sum())

    @property
    def size(self) -> int:
        return int(self.points.shape[0])

    @property
    def dim(self) -> int:
        return int(self.points.shape[1])

    def to_text(self) -> str:
        rows = [" ".join(repr(float(v)) for v in (w, *x)) for w, x in zip(self.weights, self.points)]
        return "\n".join(rows) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "DiscreteMeasure":
        rows = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                rows.append([float(tok) for tok in line.split()])
            except ValueError as exc:
                raise ConfigurationError(f"line {lineno}: cannot parse {line!r}") from exc
        if not rows or len({len(r) for r in rows}) != 1 or len(rows[0]) < 2:
            raise ConfigurationError("Measure text needs rows of equal length 'weight x1 ... xn'")
        table = np.array(rows)
        return cls(table[:, 1:], table[:, 0])


def exact_wp_discrete(mu: DiscreteMeasure, nu: DiscreteMeasure, p: int = 2) -> float:
    """
    W_p(μ, ν) for small discrete measures.

    Solves min ⟨C, π⟩ over couplings π with row sums μ.weights and column sums
    ν.weights, C_ij = ‖x_i − y_j‖^p, and returns the p-th root of the optimum.
    """
    if p not in (1, 2):
        raise ConfigurationError(f"p must be 1 or 2, got {p}")
    if mu.size > MAX_ORACLE_SUPPORT or nu.size > MAX_ORACLE_SUPPORT:
        raise ScaleError(
            f"Exact oracle supports at most {MAX_ORACLE_SUPPORT} points, got {mu.size} and {nu.size}"
        )
    if mu.dim != nu.dim:
        raise ConfigurationError(f"Measures live in different dimensions: {mu.dim} vs {nu.dim}")

    r, s = mu.size, nu.size
    diff = mu.points[:, None, :] - nu.points[None, :, :]
    cost = np.linalg.norm(diff, axis=2) ** p

    # row constraints pick π[i, :], column constraints pick π[:, j]
    rows = np.concatenate([np.repeat(np.arange(r), s), r + np.tile(np.arange(s), r)])
    cols = np.concatenate([np.arange(r * s), np.arange(r * s)])
    a_eq = csc_matrix((np.ones(2 * r * s), (rows, cols)), shape=(r + s, r * s))
    b_eq = np.concatenate([mu.weights, nu.weights])

    res = optimize.linprog(cost.reshape(-1), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if res.status != 0:
        raise NumericError(f"Transport LP failed: {res.message}", primitive="linprog")
    value = max(float(res.fun), 0.0)
    return value ** (1.0 / p)


def elliptic_metric_1d_grid(grid: Any, rho: Any, sigma: Any) -> float:
    """
    ∫ (∫_{-∞}^x σ)² / ρ dx on a uniform grid.

    This is g^W_ρ(σ, σ) = ∫ ρ (Φ′)² with −(ρ Φ′)′ = σ, whose 1-D solution is
    ρ Φ′ = −∫_{-∞}^x σ.
    """
    grid = np.asarray(grid, dtype=np.float64)
    rho = np.asarray(rho, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    if grid.ndim != 1 or grid.size < 2 or rho.shape != grid.shape or sigma.shape != grid.shape:
        raise ConfigurationError("grid, rho and sigma must be 1-D arrays of equal length >= 2")
    steps = np.diff(grid)
    if np.any(steps <= 0) or not np.allclose(steps, steps[0], rtol=1e-8, atol=0.0):
        raise InvalidInputError("Grid must be uniform and increasing")
    if np.any(rho <= 0):
        raise InvalidInputError(f"Density must be strictly positive, got min {rho.min()}")
    total = trapezoid(sigma, grid)
    if abs(total) >= 1e-8:
        raise InvalidInputError(f"Tangent must integrate to 0, got {total:.3e}")

    # Each half is accumulated from its own tail; ∫σ = 0 makes the halves agree.
    forward = cumulative_trapezoid(sigma, grid, initial=0.0)
    backward = cumulative_trapezoid(sigma[::-1], grid[::-1], initial=0.0)[::-1]
    mass = cumulative_trapezoid(rho, grid, initial=0.0)
    split = int(np.searchsorted(mass, 0.5 * mass[-1]))
    flux = np.concatenate([forward[:split], backward[split:]])
    return float(trapezoid(flux * flux / rho, grid))


def equiangular_directions(count: int = DEFAULT_DIRECTIONS) -> np.ndarray:
    """``count`` unit vectors at angles πk/count, k = 0..count−1."""
    if count < 1:
        raise ConfigurationError(f"Need at least one direction, got {count}")
    angles = np.pi * np.arange(count) / count
    return np.column_stack([np.cos(angles), np.sin(angles)])


def empirical_w1(x: Operand, y: Any, n_directions: int = DEFAULT_DIRECTIONS) -> Operand:
    """
    W1 between two equal-size empirical batches.

    1-D batches use the sorted (quantile) coupling. 2-D batches average the 1-D
    value over ``n_directions`` equiangular projections. ``x`` may be traced.
    """
    shape_x = ad.value_of(x).shape
    y = np.asarray(y, dtype=np.float64)
    if y.ndim == 1:
        y = y.reshape(-1, 1)
    if len(shape_x) != 2 or shape_x != y.shape:
        raise UsageError(f"Batches must have equal B×n shapes, got {shape_x} and {y.shape}")
    n = shape_x[1]
    if n == 1:
        return ad.mean(ad.abs_(ad.sub(ad.sort(x, axis=0), np.sort(y, axis=0))))
    if n == 2:
        dirs = equiangular_directions(n_directions).T
        px = ad.sort(ad.matmul(x, dirs), axis=0)
        py = np.sort(y @ dirs, axis=0)
        return ad.mean(ad.abs_(ad.sub(px, py)))
    raise UnsupportedDimensionError(f"Empirical W1 supports n in (1, 2), got n={n}")
