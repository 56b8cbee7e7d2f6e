"""Tests for snapshots, the experiment harness, the two-point report and Gaussian flows."""

import math
from dataclasses import replace
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from wprox.adversarial import TrainConfig
from wprox.config import ExperimentConfig, ModelSpec, load_config
from wprox.exceptions import ConfigurationError
from wprox.experiments import (
    ENVELOPE_COLUMNS,
    EXAMPLE1_COLUMNS,
    example1_report,
    gaussian_flow,
    load_snapshot,
    run_experiment,
    save_snapshot,
)
from wprox.metric import PenaltyKind, ProximalPenalty
from wprox.models import TargetSpec
from wprox.optim import FlowConfig, InnerOptimizer

RING_ACCEPTANCE = Path(__file__).resolve().parents[1] / "configs" / "ring_acceptance.cfg"


def tiny_config(tmp_path, **overrides):
    params = dict(
        name="tiny",
        model=ModelSpec(hidden=(4,)),
        target=TargetSpec(components=4),
        train=TrainConfig(batch_size=8, outer_iterations=2, generator_iterations=1, eval_batch=16),
        discriminator_hidden=(4,),
        seeds=(0, 1),
        penalties=("rwp", "none"),
        output_dir=str(tmp_path / "runs"),
    )
    params.update(overrides)
    return ExperimentConfig(**params)


class TestSnapshots:
    def test_round_trip(self, tmp_path):
        spec = ModelSpec(hidden=(3,), init_seed=4)
        gen = spec.build().with_theta(np.linspace(-1.0, 1.0, spec.build().param_length) / 3.0)
        path = save_snapshot(spec, gen, tmp_path / "g.snapshot")
        loaded_spec, loaded = load_snapshot(path)
        assert loaded_spec == spec
        np.testing.assert_array_equal(loaded.theta.values, gen.theta.values)
        assert loaded.theta.layout == gen.theta.layout

    def test_rejects_foreign_file(self, tmp_path):
        path = tmp_path / "x.snapshot"
        path.write_text("1.0\n2.0\n")
        with pytest.raises(ConfigurationError, match="not a generator snapshot"):
            load_snapshot(path)

    def test_bad_value_reports_line(self, tmp_path):
        spec = ModelSpec(kind="location_scale", latent_dim=1, output_dim=1)
        path = save_snapshot(spec, spec.build(), tmp_path / "g.snapshot")
        lines = path.read_text().splitlines()
        lines[-1] = "oops"
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(ConfigurationError, match=f"line {len(lines)}"):
            load_snapshot(path)

    def test_layout_mismatch(self, tmp_path):
        spec = ModelSpec(hidden=(3,))
        path = save_snapshot(spec, spec.build(), tmp_path / "g.snapshot")
        text = path.read_text().replace("# hidden = 3", "# hidden = 5")
        path.write_text(text)
        with pytest.raises(ConfigurationError, match="layout does not match"):
            load_snapshot(path)

    def test_missing_layout(self, tmp_path):
        path = tmp_path / "g.snapshot"
        path.write_text("# wprox generator snapshot\n# kind = identity\n")
        with pytest.raises(ConfigurationError, match="missing layout"):
            load_snapshot(path)


class TestExample1Report:
    def test_divergence_table(self):
        report = example1_report()
        assert report.table.w2sq == pytest.approx(2.5)
        assert report.table.euclidsq == pytest.approx(5.0)
        assert math.isinf(report.table.kl) and math.isinf(report.table.l2)
        assert "W2^2      2.5" in report.format()

    def test_grid_layout(self):
        report = example1_report(points=5)
        assert list(report.grid.columns) == EXAMPLE1_COLUMNS
        assert len(report.grid) == 25

    def test_wasserstein_steps_point_closer_to_the_minimizer(self):
        report = example1_report(alpha=0.2, h=0.5)
        assert report.wass_angle < 0.9 * report.euclid_angle

    def test_wasserstein_step_matches_euclidean_step_at_scaled_h(self):
        # Wasserstein thresholds are h on both coordinates; Euclidean ones are h·α and h·(1 − α).
        wass = example1_report(alpha=0.5, h=0.5).grid
        euclid = example1_report(alpha=0.5, h=1.0).grid
        np.testing.assert_allclose(wass["wass_dx"], euclid["euclid_dx"])
        np.testing.assert_allclose(wass["wass_dy"], euclid["euclid_dy"])

    def test_equal_weights_still_differ_at_equal_h(self):
        report = example1_report(alpha=0.5, h=0.5)
        assert not np.allclose(report.grid["wass_dx"], report.grid["euclid_dx"])
        assert report.wass_angle != pytest.approx(report.euclid_angle)

    def test_wasserstein_step_does_not_depend_on_alpha(self):
        low = example1_report(alpha=0.2, h=0.5).grid
        high = example1_report(alpha=0.7, h=0.5).grid
        np.testing.assert_allclose(low[["wass_dx", "wass_dy"]], high[["wass_dx", "wass_dy"]])

    def test_wasserstein_threshold_is_h_on_both_coordinates(self):
        report = example1_report(alpha=0.2, h=0.5, points=3, a_range=(-3.0, 0.0), b_range=(0.5, 4.5))
        far = report.grid[(report.grid["a"] == -3.0) & (report.grid["b"] == 4.5)].iloc[0]
        assert far["wass_dx"] == pytest.approx(0.5)
        assert far["wass_dy"] == pytest.approx(-0.5)
        assert far["euclid_dx"] == pytest.approx(0.1)
        assert far["euclid_dy"] == pytest.approx(-0.4)

    def test_validation(self):
        with pytest.raises(ConfigurationError, match="alpha"):
            example1_report(alpha=1.0)
        with pytest.raises(ConfigurationError, match="2 points"):
            example1_report(points=1)


class TestGaussianFlow:
    def test_sbe_descends(self):
        cfg = FlowConfig(h=0.2, solve="converge", penalty=ProximalPenalty(PenaltyKind.O2DIAG, "average"))
        traj = gaussian_flow(cfg, steps=30, batch_size=128)
        assert traj.lyapunov_violations() == 0
        assert traj.objective_values[-1] < 0.01 * traj.objective_values[0]

    def test_backward_matches_rwp_sbe(self):
        cfg = FlowConfig(h=0.2, solve="converge")
        sbe = gaussian_flow(cfg, scheme="sbe", steps=5, batch_size=64)
        backward = gaussian_flow(cfg, scheme="backward", steps=5, batch_size=64)
        np.testing.assert_allclose(sbe.thetas[-1], backward.thetas[-1], atol=1e-7)

    def test_forward_scheme(self):
        traj = gaussian_flow(FlowConfig(h=0.05), scheme="forward", steps=40, batch_size=64)
        assert traj.objective_values[-1] < traj.objective_values[0]
        assert list(traj.to_frame()["inner_iter"]) == [0] * 41

    def test_fixed_inner_iterations(self):
        cfg = FlowConfig(h=0.2, inner_iterations=10)
        traj = gaussian_flow(cfg, steps=5, inner=InnerOptimizer("adam", lr=0.05, beta1=0.9))
        assert traj.objective_values[-1] < traj.objective_values[0]

    def test_positive_scale_required(self):
        with pytest.raises(ConfigurationError, match="sigma0"):
            gaussian_flow(FlowConfig(), sigma0=0.0)


class TestRunExperiment:
    def test_writes_logs_snapshots_and_summaries(self, tmp_path):
        cfg = tiny_config(tmp_path)
        result = run_experiment(cfg)
        assert len(result.runs) == 4
        assert all(p.exists() for p in result.files)
        names = sorted(p.name for p in result.files)
        assert "tiny_rwp_seed1.csv" in names
        assert "tiny_none_seed0.snapshot" in names

        summary = pd.read_csv(result.summary_path)
        assert sorted(summary["penalty"]) == ["none", "rwp"]
        assert list(summary["count"]) == [2, 2]

        envelope = pd.read_csv(result.envelope_path)
        assert list(envelope.columns) == ENVELOPE_COLUMNS
        assert (envelope["seeds"] == 2).all()
        assert (envelope["min"] <= envelope["max"]).all()

    def test_snapshots_reload(self, tmp_path):
        result = run_experiment(tiny_config(tmp_path, seeds=(3,), penalties=("o2diag",)))
        spec, gen = load_snapshot(result.runs[0].snapshot_path)
        assert spec.init_seed == 3
        assert gen.param_length == spec.build().param_length

    def test_plots(self, tmp_path):
        result = run_experiment(tiny_config(tmp_path, seeds=(0,), plot=True))
        assert [p.suffix for p in result.plots] == [".svg", ".svg"]
        assert all(p.stat().st_size > 0 for p in result.plots)
        assert (tmp_path / "runs" / "tiny_example1_grid.csv").exists()

    def test_algorithm2(self, tmp_path):
        train = TrainConfig(batch_size=8, outer_iterations=2, generator_iterations=1, potential_iterations=1,
                            eval_batch=16, potential_kind="linear")
        result = run_experiment(tiny_config(tmp_path, algorithm=2, train=train, seeds=(0,), penalties=("rwp",)))
        log = pd.read_csv(result.runs[0].log_path)
        assert "potential_objective" in log.columns

    def test_unwritable_output_dir(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        with pytest.raises(ConfigurationError, match="output directory"):
            run_experiment(tiny_config(tmp_path, output_dir=str(blocker / "sub")))

    @pytest.mark.slow
    def test_worker_pool_matches_sequential(self, tmp_path):
        seq = run_experiment(tiny_config(tmp_path / "a"))
        par = run_experiment(tiny_config(tmp_path / "b", workers=2))
        for a, b in zip(seq.runs, par.runs):
            cols = ["disc_loss", "gen_loss", "penalty", "eval_metric"]
            pd.testing.assert_frame_equal(pd.read_csv(a.log_path)[cols], pd.read_csv(b.log_path)[cols])


def _metric_within_budget(runs, budget):
    """Last evaluated metric of each run whose wallclock stays within ``budget``."""
    values = []
    for run in runs:
        series = pd.read_csv(run.log_path).dropna(subset=["eval_metric"])
        within = series[series["wallclock_s"] <= budget]
        values.append(float(within["eval_metric"].iloc[-1]))
    return np.array(values)


def _final_wallclock(runs):
    return min(float(pd.read_csv(r.log_path)["wallclock_s"].iloc[-1]) for r in runs)


class TestRingAcceptanceConfig:
    def test_committed_config_describes_the_sweep(self):
        cfg = load_config(RING_ACCEPTANCE)
        assert cfg.target.kind == "ring_2d"
        assert cfg.train.outer_iterations == 5000
        assert cfg.seeds == (0, 1, 2, 3, 4)
        assert set(cfg.penalties) == {"rwp", "o1sbe", "o2diag"}


@pytest.mark.slow
class TestRingAcceptance:
    @pytest.fixture(scope="class")
    def proximal(self, tmp_path_factory):
        cfg = load_config(RING_ACCEPTANCE)
        return run_experiment(replace(cfg, output_dir=str(tmp_path_factory.mktemp("proximal")), workers=5))

    @pytest.fixture(scope="class")
    def baseline(self, tmp_path_factory):
        cfg = load_config(RING_ACCEPTANCE)
        cfg = replace(
            cfg,
            penalties=("none",),
            train=replace(cfg.train, generator_iterations=10),
            output_dir=str(tmp_path_factory.mktemp("baseline")),
            workers=5,
        )
        return run_experiment(cfg)

    @pytest.mark.parametrize("penalty", ["rwp", "o1sbe", "o2diag"])
    def test_fgd_threshold_in_four_of_five_seeds(self, proximal, penalty):
        runs = [r for r in proximal.runs if r.penalty == penalty]
        best = [pd.read_csv(r.log_path)["eval_metric"].min() for r in runs]
        assert sum(v < 0.05 for v in best) >= 4

    def test_unregularized_baseline_varies_more_at_matched_wallclock(self, proximal, baseline):
        rwp = [r for r in proximal.runs if r.penalty == "rwp"]
        budget = min(_final_wallclock(rwp), _final_wallclock(baseline.runs))
        spread_rwp = np.var(_metric_within_budget(rwp, budget), ddof=1)
        spread_none = np.var(_metric_within_budget(baseline.runs, budget), ddof=1)
        assert spread_none > spread_rwp
