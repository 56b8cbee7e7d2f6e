"""Tests for the sample-quality metrics."""

import math

import numpy as np
import pytest

from wprox.evaluation import (
    EvalMetric,
    evaluate_metric,
    frechet_gaussian_distance,
    frechet_gaussian_report,
    w_1d_sorted,
)
from wprox.exceptions import ConfigurationError, UnsupportedDimensionError, UsageError
from wprox.transport import DiscreteMeasure, exact_wp_discrete


@pytest.fixture
def rng():
    return np.random.default_rng(99)


class TestFrechet:
    def test_batch_against_itself(self, rng):
        x = rng.normal(size=(200, 3))
        assert frechet_gaussian_distance(x, x) < 1e-8

    def test_symmetric(self, rng):
        x = rng.normal(size=(100, 2))
        y = rng.normal(loc=1.0, scale=2.0, size=(150, 2))
        assert frechet_gaussian_distance(x, y) == pytest.approx(frechet_gaussian_distance(y, x), rel=1e-8)

    def test_one_dimensional_gaussians(self, rng):
        x = rng.normal(0.0, 1.0, size=(200_000, 1))
        y = rng.normal(1.0, 2.0, size=(200_000, 1))
        assert frechet_gaussian_distance(x, y) == pytest.approx(2.0, abs=0.03)

    def test_needs_enough_samples(self, rng):
        with pytest.raises(ConfigurationError, match="n\\+1"):
            frechet_gaussian_distance(rng.normal(size=(2, 2)), rng.normal(size=(10, 2)))

    def test_rank_deficient_covariance_is_regularized(self, rng, caplog):
        x = rng.normal(size=(50, 2))
        x[:, 1] = x[:, 0]
        report = frechet_gaussian_report(x, rng.normal(size=(50, 2)))
        assert report.regularized
        assert math.isfinite(report.distance)
        assert "Rank-deficient" in caplog.text

    def test_dimension_mismatch(self, rng):
        with pytest.raises(ConfigurationError, match="dimensions"):
            frechet_gaussian_distance(rng.normal(size=(10, 1)), rng.normal(size=(10, 2)))


class TestSortedCoupling:
    def test_unit_shift(self):
        assert w_1d_sorted([0.0, 1.0], [1.0, 2.0]) == pytest.approx(1.0)

    def test_matches_linear_program(self, rng):
        x = rng.normal(size=5)
        y = rng.normal(size=5)
        exact = exact_wp_discrete(DiscreteMeasure.from_points(x), DiscreteMeasure.from_points(y), p=2)
        assert w_1d_sorted(x, y, p=2) == pytest.approx(exact, abs=1e-6)
        exact1 = exact_wp_discrete(DiscreteMeasure.from_points(x), DiscreteMeasure.from_points(y), p=1)
        assert w_1d_sorted(x, y, p=1) == pytest.approx(exact1, abs=1e-6)

    def test_unequal_sizes(self):
        with pytest.raises(UsageError):
            w_1d_sorted(np.zeros(3), np.zeros(4))

    def test_two_dimensions(self):
        with pytest.raises(UnsupportedDimensionError):
            w_1d_sorted(np.zeros((3, 2)), np.zeros((3, 2)))


class TestEvaluateMetric:
    def test_legality(self):
        assert EvalMetric("w1-1d-sorted").legal_for(1)
        assert not EvalMetric("w1-1d-sorted").legal_for(2)
        assert EvalMetric("sliced-w1-2d").legal_for(2)
        assert EvalMetric("frechet-gaussian").legal_for(5)

    def test_unknown_tag(self):
        with pytest.raises(ConfigurationError, match="Unknown metric"):
            EvalMetric("inception")

    def test_dispatch(self, rng):
        x = rng.normal(size=(64, 1))
        assert evaluate_metric("w1-1d-sorted", x, x + 0.5) == pytest.approx(0.5)
        assert evaluate_metric("w2-1d-sorted", x, x + 0.5) == pytest.approx(0.5)

    def test_illegal_dimension(self, rng):
        with pytest.raises(UnsupportedDimensionError):
            evaluate_metric("sliced-w1-2d", rng.normal(size=(8, 1)), rng.normal(size=(8, 1)))
