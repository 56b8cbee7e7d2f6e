"""Tests for the experiment configuration and its text form."""

import math

import numpy as np
import pytest

from wprox.adversarial import TrainConfig
from wprox.config import (
    ExperimentConfig,
    ModelSpec,
    load_config,
    parse_config,
    parse_dataclass,
    save_config,
    serialize_config,
)
from wprox.exceptions import ConfigurationError
from wprox.metric import Midpoint, PenaltyKind, ProximalPenalty
from wprox.models import TargetSpec
from wprox.optim import FlowConfig, InnerOptimizer


@pytest.fixture
def ring_config():
    return ExperimentConfig(
        name="ring",
        model=ModelSpec(hidden=(16, 16)),
        flow=FlowConfig(h=math.inf, penalty=ProximalPenalty(PenaltyKind.AFFINE, Midpoint.AVERAGE, 0.0, 2, False)),
        train=TrainConfig(batch_size=32, generator_optimizer=InnerOptimizer("sgd", lr=0.05), resample_latents=False),
        seeds=(0, 1, 2),
        penalties=("rwp", "o2diag", "none"),
        plot=True,
    )


class TestRoundTrip:
    def test_default_config(self):
        cfg = ExperimentConfig()
        assert parse_config(serialize_config(cfg)) == cfg

    def test_non_default_config(self, ring_config):
        text = serialize_config(ring_config)
        assert "flow.h = inf" in text
        assert "flow.penalty.kind = affine" in text
        assert "flow.penalty.damping = 0.0" in text
        assert "penalties = rwp,o2diag,none" in text
        assert parse_config(text) == ring_config

    def test_file_round_trip(self, tmp_path, ring_config):
        path = save_config(ring_config, tmp_path / "ring.cfg")
        assert load_config(path) == ring_config

    def test_optional_none(self):
        text = serialize_config(ExperimentConfig())
        assert "flow.penalty.damping = none" in text
        assert parse_config(text).flow.penalty.damping is None


class TestParsing:
    def test_partial_text_keeps_defaults(self):
        cfg = parse_config("# comment\nname = tiny\n\ntrain.h = 0.5\nmodel.hidden = 8,8\n")
        assert cfg.name == "tiny"
        assert cfg.train.h == 0.5
        assert cfg.model.hidden == (8, 8)
        assert cfg.train.batch_size == TrainConfig().batch_size

    def test_enum_values(self):
        cfg = parse_config("train.penalty.kind = o2diag\ntrain.penalty.midpoint = average\n")
        assert cfg.train.penalty == ProximalPenalty(PenaltyKind.O2DIAG, Midpoint.AVERAGE)

    def test_booleans(self):
        assert parse_config("plot = true\n").plot is True
        with pytest.raises(ConfigurationError, match="line 1: bad value"):
            parse_config("plot = yes\n")

    def test_missing_equals(self):
        with pytest.raises(ConfigurationError, match="line 2: expected 'key = value'"):
            parse_config("name = x\njust words\n")

    def test_unknown_key(self):
        with pytest.raises(ConfigurationError, match="line 1: unknown key"):
            parse_config("model.depth = 3\n")

    def test_unknown_section(self):
        with pytest.raises(ConfigurationError, match="line 3: unknown key"):
            parse_config("name = x\n\noptimizer.lr = 0.1\n")

    def test_duplicate_key(self):
        with pytest.raises(ConfigurationError, match="line 2: duplicate key"):
            parse_config("name = a\nname = b\n")

    def test_bad_number(self):
        with pytest.raises(ConfigurationError, match="line 1: bad value for 'train.h'"):
            parse_config("train.h = fast\n")

    def test_validation_error_reports_line(self):
        with pytest.raises(ConfigurationError, match="line 2: .*batch_size"):
            parse_config("name = x\ntrain.batch_size = 0\n")

    def test_unknown_penalty_name(self):
        with pytest.raises(ConfigurationError, match="Unknown penalty"):
            parse_config("penalties = rwp,kl\n")

    def test_dimension_mismatch(self):
        with pytest.raises(ConfigurationError, match="Target dimension"):
            ExperimentConfig(model=ModelSpec(output_dim=1), target=TargetSpec(kind="ring_2d"))

    def test_parse_other_dataclass(self):
        spec = parse_dataclass(ModelSpec, "kind = location_scale\noutput_dim = 1\nlatent_dim = 1\n")
        assert spec.kind == "location_scale"
        assert spec.build().param_length == 2


class TestModelSpec:
    def test_unknown_kind(self):
        with pytest.raises(ConfigurationError, match="generator kind"):
            ModelSpec(kind="flow")

    def test_build_kinds(self):
        assert ModelSpec(kind="delta_mixture", latent_dim=1, output_dim=1).build().param_length == 2
        assert ModelSpec(kind="identity").build().param_length == 0
        assert ModelSpec(hidden=(4,)).build().forward(np.zeros((1, 2))).shape == (1, 2)
