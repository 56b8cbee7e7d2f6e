"""Tests for the proximal penalties, metric tensors and delta-mixture closed forms."""

import math

import numpy as np
import pytest

from wprox.autodiff import finite_diff_check
from wprox.exceptions import (
    ConfigurationError,
    DegenerateCoordinateError,
    NumericError,
    RankDeficiencyError,
    UnsupportedDimensionError,
    UsageError,
)
from wprox.metric import (
    AffineBasis,
    MetricTensor,
    Midpoint,
    PenaltyKind,
    ProximalPenalty,
    affine_metric,
    affine_metric_tensor,
    delta_mixture_distances,
    delta_mixture_metric_tensor,
    delta_mixture_w1_objective,
    metric_tensor_1d,
    o1sbe_penalty,
    o2diag_penalty,
    parse_penalty,
    relaxed_metric_tensor,
    rwp_penalty,
)
from wprox.models import DeltaMixtureModel, Generator, LatentSource, SampleBatch, sample_from
from wprox.transport import DiscreteMeasure, exact_wp_discrete


@pytest.fixture
def rng():
    return np.random.default_rng(314)


def paired(rng, batch=32, dim=2, count=3):
    """``count`` random batches sharing one latent provenance."""
    provenance = LatentSource(dim, seed=int(rng.integers(1000))).draw(batch).provenance
    return [SampleBatch(rng.normal(size=(batch, dim)) * rng.uniform(0.5, 2.0), provenance)
            for _ in range(count)]


def dense_o2diag(x, y, ytilde):
    """Supremum of the diagonal quadratic dual by a dense linear solve."""
    n = x.shape[1]
    m = np.mean(x - y, axis=0)
    s = 0.5 * np.mean(x**2 - y**2, axis=0)
    ybar = np.mean(ytilde, axis=0)
    system = np.block([[np.eye(n), np.diag(ybar)], [np.diag(ybar), np.diag(np.mean(ytilde**2, axis=0))]])
    rhs = np.concatenate([m, s])
    return float(rhs @ np.linalg.solve(system, rhs))


class TestDeltaMixtureClosedForms:
    def test_reference_distances(self):
        record = delta_mixture_distances(DeltaMixtureModel(-1.0, 1.0, 0.5), DeltaMixtureModel(-2.0, 3.0, 0.5))
        assert record.w2sq == pytest.approx(2.5)
        assert record.euclidsq == pytest.approx(5.0)
        assert record.kl == math.inf
        assert record.l2 == math.inf

    def test_identical_models(self):
        m = DeltaMixtureModel(-1.0, 1.0, 0.3)
        assert delta_mixture_distances(m, m).as_dict() == {"w2sq": 0.0, "euclidsq": 0.0, "kl": 0.0, "l2": 0.0}

    def test_ratio_mismatch(self):
        with pytest.raises(UsageError, match="mixture ratios"):
            delta_mixture_distances(DeltaMixtureModel(0.0, 1.0, 0.5), DeltaMixtureModel(0.0, 1.0, 0.4))

    def test_metric_tensor(self):
        g = delta_mixture_metric_tensor(DeltaMixtureModel(-1.0, 1.0, 0.2))
        np.testing.assert_array_equal(g.matrix, np.diag([0.2, 0.8]))
        assert g.tag == "delta-mixture-closed-form"

    def test_w1_objective(self):
        f = delta_mixture_w1_objective(DeltaMixtureModel(-1.2, 2.1, 0.25))
        assert float(f([-1.0, 1.0])) == pytest.approx(0.25 * 0.2 + 0.75 * 1.1)

    def test_exact1d_penalty_on_delta_generator(self):
        gen = Generator.delta_mixture(-2.0, 3.0, alpha=0.2)
        latents = LatentSource(1, seed=1).draw(16)
        f = ProximalPenalty(PenaltyKind.EXACT1D).as_function(gen, gen.theta, latents)
        assert float(f([-1.0, 1.0])) == pytest.approx(0.2 * 1.0 + 0.8 * 4.0)


class TestPenaltyIdentities:
    def test_affine_degree_one_is_o1sbe(self, rng):
        basis = AffineBasis(2, degree=1)
        for _ in range(1000):
            x, y, ytilde = paired(rng, batch=8)
            expected = o1sbe_penalty(x, y)
            assert affine_metric(basis, x, y, ytilde, damping=0.0) == pytest.approx(expected, rel=1e-12, abs=1e-300)

    def test_o1sbe_never_exceeds_rwp(self, rng):
        for _ in range(200):
            x, y = paired(rng, count=2)
            assert o1sbe_penalty(x, y) <= rwp_penalty(x, y) + 1e-15

    def test_affine_diagonal_degree_two_is_o2diag(self, rng):
        basis = AffineBasis(3, degree=2, diagonal=True)
        for _ in range(100):
            x, y, ytilde = paired(rng, batch=40, dim=3)
            expected = o2diag_penalty(x, y, ytilde)
            assert affine_metric(basis, x, y, ytilde, damping=0.0) == pytest.approx(expected, rel=1e-9)

    def test_o2diag_matches_dense_solve(self, rng):
        for _ in range(100):
            x, y, ytilde = paired(rng, batch=40, dim=3)
            expected = dense_o2diag(x.values, y.values, ytilde.values)
            assert o2diag_penalty(x, y, ytilde) == pytest.approx(expected, rel=1e-8)

    def test_full_basis_dominates_diagonal(self, rng):
        # the full quadratic span contains the diagonal one
        for _ in range(20):
            x, y, ytilde = paired(rng, batch=50)
            diag = affine_metric(AffineBasis(2, 2, True), x, y, ytilde, damping=0.0)
            full = affine_metric(AffineBasis(2, 2, False), x, y, ytilde, damping=0.0)
            assert full >= diag * (1 - 1e-9)


class TestGaussianExactness:
    @pytest.fixture
    def batches(self):
        gen = Generator.location_scale([0.0], [1.0])
        latents = LatentSource(1, seed=2024).draw(100_000)
        x = sample_from(gen, latents, [0.0, 1.0])
        y = sample_from(gen, latents, [1.0, 2.0])
        mid = sample_from(gen, latents, [0.5, 1.5])
        return x, y, mid

    def test_average_midpoint_recovers_w2(self, batches):
        x, y, mid = batches
        assert o2diag_penalty(x, y, mid) == pytest.approx(2.0, abs=0.04)

    def test_previous_iterate_is_biased(self, batches):
        x, y, _ = batches
        assert o2diag_penalty(x, y) == pytest.approx(1.25, abs=0.03)

    def test_penalty_function_agrees_with_batch_operation(self, batches):
        x, y, mid = batches
        gen = Generator.location_scale([0.0], [1.0])
        latents = LatentSource(1, seed=2024).draw(100_000)
        penalty = ProximalPenalty(PenaltyKind.O2DIAG, Midpoint.AVERAGE)
        f = penalty.as_function(gen, [1.0, 2.0], latents)
        assert float(f([0.0, 1.0])) == pytest.approx(o2diag_penalty(x, y, mid), rel=1e-12)

    def test_relaxed_penalty_recovers_w2(self, batches):
        x, y, _ = batches
        squared = (x.values - y.values)[:, 0] ** 2
        standard_error = squared.std(ddof=1) / math.sqrt(squared.size)
        assert abs(rwp_penalty(x, y) - 2.0) < 5.0 * standard_error


class TestRelaxedPenaltyOracle:
    def test_equals_exact_w2_for_monotone_pairs(self, rng):
        gen = Generator.location_scale([0.0], [1.0])
        for trial in range(10):
            latents = LatentSource(1, seed=trial).draw(int(rng.integers(5, 41)))
            x = sample_from(gen, latents, [rng.normal(), rng.uniform(0.2, 3.0)])
            y = sample_from(gen, latents, [rng.normal(), rng.uniform(0.2, 3.0)])
            exact = exact_wp_discrete(DiscreteMeasure.from_points(x.values),
                                      DiscreteMeasure.from_points(y.values), p=2)
            assert rwp_penalty(x, y) == pytest.approx(exact**2, rel=1e-7, abs=1e-10)

    def test_bounds_exact_w2_from_above_in_two_dimensions(self, rng):
        gen = Generator.mlp(2, 2, hidden=(6,), seed=4)
        latents = LatentSource(2, seed=12).draw(24)
        for _ in range(5):
            theta = gen.theta.values + 0.3 * rng.normal(size=gen.param_length)
            x, y = sample_from(gen, latents, theta), sample_from(gen, latents)
            exact = exact_wp_discrete(DiscreteMeasure.from_points(x.values),
                                      DiscreteMeasure.from_points(y.values), p=2)
            assert rwp_penalty(x, y) >= exact**2 - 1e-9


class TestPenaltyErrors:
    def test_unpaired_batches(self, rng):
        x = SampleBatch(rng.normal(size=(8, 2)), LatentSource(2, seed=1).draw(8).provenance)
        y = SampleBatch(rng.normal(size=(8, 2)), LatentSource(2, seed=2).draw(8).provenance)
        for op in (rwp_penalty, o1sbe_penalty, o2diag_penalty):
            with pytest.raises(UsageError, match="not paired"):
                op(x, y)

    def test_data_batches_are_never_paired(self, rng):
        x = SampleBatch(rng.normal(size=(4, 1)))
        with pytest.raises(UsageError):
            rwp_penalty(x, x)

    def test_degenerate_coordinate(self, rng):
        x, y = paired(rng, batch=10, count=2)
        values = y.values.copy()
        values[:, 1] = 3.0
        y = SampleBatch(values, y.provenance)
        with pytest.raises(DegenerateCoordinateError) as err:
            o2diag_penalty(x, y)
        assert err.value.coordinate == 1

    def test_singular_gram_without_damping(self, rng):
        x, y, ytilde = paired(rng, batch=10)
        values = ytilde.values.copy()
        values[:, 0] = 1.5
        ytilde = SampleBatch(values, ytilde.provenance)
        basis = AffineBasis(2, degree=2)
        with pytest.raises(RankDeficiencyError) as err:
            affine_metric(basis, x, y, ytilde, damping=0.0)
        assert err.value.null_direction.shape == (basis.size,)
        assert np.isfinite(affine_metric(basis, x, y, ytilde))

    def test_exact1d_rejects_two_dimensions(self):
        gen = Generator.location_scale([0.0, 0.0], [1.0, 1.0])
        latents = LatentSource(2).draw(4)
        with pytest.raises(UnsupportedDimensionError):
            ProximalPenalty(PenaltyKind.EXACT1D).as_function(gen, gen.theta, latents)

    def test_exact1d_needs_parameters(self, rng):
        x, y = paired(rng, count=2)
        with pytest.raises(UsageError):
            ProximalPenalty(PenaltyKind.EXACT1D).distance_sq(x.values, y.values)

    def test_negative_damping(self):
        with pytest.raises(ConfigurationError, match="Damping"):
            ProximalPenalty(PenaltyKind.AFFINE, damping=-1.0)


class TestPenaltyGradients:
    @pytest.mark.parametrize(
        "penalty",
        [
            ProximalPenalty(PenaltyKind.RWP),
            ProximalPenalty(PenaltyKind.O1SBE),
            ProximalPenalty(PenaltyKind.O2DIAG),
            ProximalPenalty(PenaltyKind.O2DIAG, Midpoint.AVERAGE),
            ProximalPenalty(PenaltyKind.AFFINE, degree=1),
            ProximalPenalty(PenaltyKind.AFFINE, Midpoint.AVERAGE, degree=2),
            ProximalPenalty(PenaltyKind.AFFINE, degree=2, diagonal=False),
        ],
        ids=lambda p: f"{p.label}-{p.midpoint.value}",
    )
    def test_matches_finite_differences(self, rng, penalty):
        gen = Generator.location_scale([0.0, 0.0], [1.0, 1.0])
        latents = LatentSource(2, seed=5).draw(64)
        for _ in range(20):
            theta_k = np.concatenate([rng.normal(size=2), rng.uniform(0.5, 2.0, size=2)])
            theta = theta_k + 0.3 * rng.normal(size=4)
            f = penalty.as_function(gen, theta_k, latents)
            assert finite_diff_check(f, theta, scale_floor=1e-3).max_rel_error < 1e-5

    def test_mlp_generator(self, rng):
        gen = Generator.mlp(2, 2, hidden=(6,), activation="tanh", seed=3)
        latents = LatentSource(2, seed=6).draw(32)
        theta_k = gen.theta.values
        for kind in (PenaltyKind.RWP, PenaltyKind.O2DIAG):
            f = ProximalPenalty(kind).as_function(gen, theta_k, latents)
            theta = theta_k + 0.05 * rng.normal(size=theta_k.size)
            assert finite_diff_check(f, theta, scale_floor=1e-3).max_rel_error < 1e-5

    def test_exact1d(self, rng):
        gen = Generator.location_scale([0.0], [1.0])
        latents = LatentSource(1, seed=8).draw(64)
        for midpoint in Midpoint:
            f = ProximalPenalty(PenaltyKind.EXACT1D, midpoint).as_function(gen, [0.5, 1.5], latents)
            assert finite_diff_check(f, rng.normal(size=2), scale_floor=1e-3).max_rel_error < 1e-5

    def test_exact1d_equals_rwp_for_location_scale(self, rng):
        gen = Generator.location_scale([0.0], [1.0])
        latents = LatentSource(1, seed=9).draw(128)
        exact = ProximalPenalty(PenaltyKind.EXACT1D).as_function(gen, [0.5, 1.5], latents)
        rwp = ProximalPenalty(PenaltyKind.RWP).as_function(gen, [0.5, 1.5], latents)
        for _ in range(10):
            theta = rng.normal(size=2)
            assert float(exact(theta)) == pytest.approx(float(rwp(theta)), rel=1e-12)

    def test_none_penalty_is_zero(self):
        gen = Generator.location_scale([0.0], [1.0])
        f = ProximalPenalty(PenaltyKind.NONE).as_function(gen, gen.theta, LatentSource(1).draw(4))
        assert float(f([3.0, 4.0])) == 0.0


class TestMetricTensors:
    def test_relaxed_tensor_of_location_scale(self):
        gen = Generator.location_scale([0.5], [1.5])
        latents = LatentSource(1, seed=3).draw(200)
        z = latents.values.ravel()
        g = relaxed_metric_tensor(gen, gen.theta, latents)
        expected = np.array([[1.0, z.mean()], [z.mean(), np.mean(z**2)]])
        np.testing.assert_allclose(g.matrix, expected, atol=1e-12)
        assert g.tag == "exact-1D"

    def test_relaxed_tag_in_two_dimensions(self):
        gen = Generator.location_scale([0.0, 0.0], [1.0, 1.0])
        g = relaxed_metric_tensor(gen, gen.theta, LatentSource(2).draw(10))
        assert g.tag == "relaxed-pullback"
        assert g.dim == 4

    def test_delta_generator_tensor_approaches_closed_form(self):
        gen = Generator.delta_mixture(-1.0, 1.0, alpha=0.3)
        g = metric_tensor_1d(gen, gen.theta, LatentSource(1, seed=12), 5000)
        np.testing.assert_allclose(g.matrix, np.diag([0.3, 0.7]), atol=0.035)

    def test_metric_tensor_1d_rejects_two_dimensions(self):
        gen = Generator.location_scale([0.0, 0.0], [1.0, 1.0])
        with pytest.raises(UnsupportedDimensionError):
            metric_tensor_1d(gen, gen.theta, LatentSource(2), 10)

    def test_affine_tensor_is_exact_for_location_scale(self):
        gen = Generator.location_scale([0.5], [1.5])
        latents = LatentSource(1, seed=4).draw(300)
        z = latents.values.ravel()
        g = affine_metric_tensor(gen, gen.theta, AffineBasis(1, degree=2), latents, damping=0.0)
        expected = np.array([[1.0, z.mean()], [z.mean(), np.mean(z**2)]])
        np.testing.assert_allclose(g.matrix, expected, rtol=1e-8, atol=1e-10)
        assert g.tag == "affine-pullback"

    def test_affine_degree_one_tensor(self):
        gen = Generator.location_scale([0.5], [1.5])
        latents = LatentSource(1, seed=4).draw(50)
        zbar = latents.values.mean()
        g = affine_metric_tensor(gen, gen.theta, AffineBasis(1, degree=1), latents, damping=0.0)
        np.testing.assert_allclose(g.matrix, [[1.0, zbar], [zbar, zbar**2]], atol=1e-12)

    def test_not_symmetric(self):
        with pytest.raises(NumericError, match="symmetric"):
            MetricTensor(np.array([[1.0, 2.0], [0.0, 1.0]]), np.zeros(2), "exact-1D")

    def test_not_positive_semidefinite(self):
        with pytest.raises(NumericError, match="semidefinite"):
            MetricTensor(-np.eye(2), np.zeros(2), "exact-1D")

    def test_unknown_tag(self):
        with pytest.raises(ConfigurationError, match="tag"):
            MetricTensor(np.eye(2), np.zeros(2), "fisher")


class TestParsePenalty:
    @pytest.mark.parametrize("text", ["rwp", "o1sbe", "o2diag", "exact1d", "none", "affine1", "affine2d", "affine2f"])
    def test_labels_round_trip(self, text):
        assert parse_penalty(text).label == text

    def test_affine_variants(self):
        full = parse_penalty(" Affine2F ")
        assert full.kind is PenaltyKind.AFFINE
        assert full.degree == 2 and not full.diagonal

    def test_passthrough(self):
        p = ProximalPenalty(PenaltyKind.O2DIAG, Midpoint.AVERAGE)
        assert parse_penalty(p) is p

    def test_unknown(self):
        with pytest.raises(ConfigurationError, match="Unknown penalty"):
            parse_penalty("kl")

    def test_basis_sizes(self):
        assert AffineBasis(3, 1).size == 3
        assert AffineBasis(3, 2, True).size == 6
        assert AffineBasis(3, 2, False).size == 9
