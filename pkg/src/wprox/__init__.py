"""
wprox
=====

Wasserstein natural-gradient and natural-proximal optimization for implicit
generative models at desk scale: sample-based proximal penalties, pulled-back
metric tensors, gradient-flow discretizations, adversarial training loops, and
exact oracles to check them against.

Author: wprox developers
"""

__version__ = "0.1.0"

from wprox.adversarial import Discriminator, PotentialNetwork, TrainConfig, train_algorithm1, train_algorithm2
from wprox.config import ExperimentConfig, ModelSpec, parse_config, serialize_config
from wprox.metric import PenaltyKind, ProximalPenalty
from wprox.models import Generator, LatentSource, SampleBatch, TargetSpec
from wprox.optim import FlowConfig, flow_integrate
from wprox.params import ParamVector

__all__ = [
    "Discriminator",
    "ExperimentConfig",
    "FlowConfig",
    "Generator",
    "LatentSource",
    "ModelSpec",
    "ParamVector",
    "PenaltyKind",
    "PotentialNetwork",
    "ProximalPenalty",
    "SampleBatch",
    "TargetSpec",
    "TrainConfig",
    "flow_integrate",
    "parse_config",
    "serialize_config",
    "train_algorithm1",
    "train_algorithm2",
]
