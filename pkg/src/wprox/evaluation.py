#!/usr/bin/env python3
"""
Sample-Quality Metrics
======================

Raw-space quality measures for generated batches:

  frechet-gaussian  W2 between Gaussians fitted to the two batches (reported as
                    FGD; the feature map is the identity, so values are not
                    comparable to Inception-based scores)
  w1-1d-sorted      W1 by sorted coupling, n = 1
  w2-1d-sorted      W2 by sorted coupling, n = 1
  sliced-w1-2d      W1 averaged over 64 equiangular projections, n = 2

Author: wprox developers
"""

import logging
from dataclasses import dataclass
from typing import Any

import numpy as np

from wprox.exceptions import ConfigurationError, UnsupportedDimensionError, UsageError
from wprox.models import SampleBatch
from wprox.transport import empirical_w1

logger = logging.getLogger(__name__)

METRIC_TAGS = ("frechet-gaussian", "w1-1d-sorted", "w2-1d-sorted", "sliced-w1-2d")
REGULARIZATION = 1e-10


def _batch(x: Any) -> np.ndarray:
    values = x.values if isinstance(x, SampleBatch) else np.asarray(x, dtype=np.float64)
    if values.ndim == 1:
        values = values.reshape(-1, 1)
    return values


@dataclass(frozen=True)
class EvalMetric:
    tag: str = "frechet-gaussian"
    batch_size: int = 512

    def __post_init__(self) -> None:
        if self.tag not in METRIC_TAGS:
            raise ConfigurationError(f"Unknown metric {self.tag!r}; expected one of {METRIC_TAGS}")
        if self.batch_size < 1:
            raise ConfigurationError(f"Metric batch size must be >= 1, got {self.batch_size}")

    def legal_for(self, dim: int) -> bool:
        if self.tag in ("w1-1d-sorted", "w2-1d-sorted"):
            return dim == 1
        if self.tag == "sliced-w1-2d":
            return dim == 2
        return dim >= 1


@dataclass(frozen=True)
class FrechetReport:
    distance: float
    regularized: bool


def _sqrt_psd(c: np.ndarray) -> np.ndarray:
    w, u = np.linalg.eigh(c)
    return (u * np.sqrt(np.clip(w, 0.0, None))) @ u.T


def frechet_gaussian_report(x: Any, y: Any) -> FrechetReport:
    """
    ‖m₁ − m₂‖² + Tr(C₁ + C₂ − 2 (C₁^{1/2} C₂ C₁^{1/2})^{1/2}).

    Covariances whose smallest eigenvalue is not above 1e-12 times the
    largest get 1e-10·I added to both; the report says so.
    """
    a, b = _batch(x), _batch(y)
    if a.shape[1] != b.shape[1]:
        raise ConfigurationError(f"Batches live in different dimensions: {a.shape[1]} vs {b.shape[1]}")
    n = a.shape[1]
    if a.shape[0] < n + 1 or b.shape[0] < n + 1:
        raise ConfigurationError(f"Frechet distance needs at least n+1={n + 1} samples per batch")

    c1 = np.atleast_2d(np.cov(a, rowvar=False))
    c2 = np.atleast_2d(np.cov(b, rowvar=False))
    regularized = False
    for c in (c1, c2):
        w = np.linalg.eigvalsh(c)
        if w[0] <= 1e-12 * max(w[-1], np.finfo(float).tiny):
            regularized = True
    if regularized:
        logger.warning("Rank-deficient covariance; adding %.0e*I before the matrix square root", REGULARIZATION)
        c1 = c1 + REGULARIZATION * np.eye(n)
        c2 = c2 + REGULARIZATION * np.eye(n)

    root = _sqrt_psd(c1)
    middle = root @ c2 @ root
    cross = np.sqrt(np.clip(np.linalg.eigvalsh(0.5 * (middle + middle.T)), 0.0, None)).sum()
    diff = a.mean(axis=0) - b.mean(axis=0)
    value = float(diff @ diff + np.trace(c1) + np.trace(c2) - 2.0 * cross)
    return FrechetReport(max(value, 0.0), regularized)


def frechet_gaussian_distance(x: Any, y: Any) -> float:
    return frechet_gaussian_report(x, y).distance


def w_1d_sorted(x: Any, y: Any, p: int = 1) -> float:
    """((1/B) Σ |x_(i) − y_(i)|^p)^{1/p} over order statistics."""
    if p not in (1, 2):
        raise ConfigurationError(f"p must be 1 or 2, got {p}")
    a, b = _batch(x), _batch(y)
    if a.shape[1] != 1 or b.shape[1] != 1:
        raise UnsupportedDimensionError("Sorted coupling needs 1-D samples")
    if a.shape[0] != b.shape[0]:
        raise UsageError(f"Sorted coupling needs equal batch sizes, got {a.shape[0]} and {b.shape[0]}")
    gaps = np.abs(np.sort(a[:, 0]) - np.sort(b[:, 0]))
    return float(np.mean(gaps**p) ** (1.0 / p))


def evaluate_metric(tag: str, fake: Any, real: Any) -> float:
    """Dispatch on a metric tag."""
    metric = EvalMetric(tag)
    a = _batch(fake)
    if not metric.legal_for(a.shape[1]):
        raise UnsupportedDimensionError(f"Metric {tag!r} is not defined for n={a.shape[1]}")
    if tag == "frechet-gaussian":
        return frechet_gaussian_distance(a, real)
    if tag == "w1-1d-sorted":
        return w_1d_sorted(a, real, p=1)
    if tag == "w2-1d-sorted":
        return w_1d_sorted(a, real, p=2)
    return float(empirical_w1(a, _batch(real)))
