#!/usr/bin/env python3
"""
Experiment Configuration
========================

:class:`ExperimentConfig` gathers every knob of a run in frozen dataclasses.
Its text form has one ``section.key = value`` line per field, nested sections
joined by dots::

    # ring experiment
    name = ring
    model.kind = mlp
    train.h = 0.2
    train.generator_optimizer.lr = 0.001
    penalties = rwp,o1sbe,o2diag,none

Values: integers, floats in ``repr`` form (``inf`` allowed), ``true``/``false``,
plain strings, comma-separated tuples, enum values by name and ``none`` for
unset optional fields. Unknown keys and unparsable values are rejected with the
offending line number; :func:`serialize_config` writes every field so that
``parse_config(serialize_config(cfg)) == cfg``.

Author: wprox developers
"""

import dataclasses
import logging
import typing
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Union

import numpy as np

from wprox.adversarial import TrainConfig
from wprox.exceptions import ConfigurationError
from wprox.metric import parse_penalty
from wprox.models import GENERATOR_KINDS, Generator, TargetSpec
from wprox.optim import FlowConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModelSpec:
    """Serializable description of a generator; :meth:`build` instantiates it."""

    kind: str = "mlp"
    latent_dim: int = 2
    output_dim: int = 2
    hidden: tuple[int, ...] = (32, 32)
    activation: str = "tanh"
    latent_distribution: str = "normal"
    init_seed: int = 0
    alpha: float = 0.5
    a: float = -1.0
    b: float = 1.0
    mu: float = 0.0
    sigma: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in GENERATOR_KINDS:
            raise ConfigurationError(f"Unknown generator kind {self.kind!r}; expected one of {GENERATOR_KINDS}")

    def build(self) -> Generator:
        n = self.output_dim
        if self.kind == "mlp":
            return Generator.mlp(self.latent_dim, n, self.hidden, self.activation,
                                 self.init_seed, self.latent_distribution)
        if self.kind == "location_scale":
            return Generator.location_scale(np.full(n, self.mu), np.full(n, self.sigma))
        if self.kind == "delta_mixture":
            return Generator.delta_mixture(self.a, self.b, self.alpha, self.latent_distribution)
        if self.kind == "constant":
            return Generator.constant(np.full(n, self.mu), self.latent_dim)
        return Generator.identity(n)


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "experiment"
    model: ModelSpec = field(default_factory=ModelSpec)
    target: TargetSpec = field(default_factory=TargetSpec)
    flow: FlowConfig = field(default_factory=FlowConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    algorithm: int = 1
    discriminator_hidden: tuple[int, ...] = (32, 32)
    discriminator_leaky_slope: float = 0.2
    seeds: tuple[int, ...] = (0,)
    penalties: tuple[str, ...] = ("rwp",)
    output_dir: str = "runs"
    plot: bool = False
    workers: int = 1

    def __post_init__(self) -> None:
        if self.algorithm not in (1, 2):
            raise ConfigurationError(f"algorithm must be 1 or 2, got {self.algorithm}")
        if not self.seeds:
            raise ConfigurationError("At least one seed is required")
        if not self.penalties:
            raise ConfigurationError("At least one penalty is required")
        for p in self.penalties:
            parse_penalty(p)
        if self.workers < 1:
            raise ConfigurationError(f"workers must be >= 1, got {self.workers}")
        if self.target.dim != self.model.output_dim:
            raise ConfigurationError(
                f"Target dimension {self.target.dim} != model output dimension {self.model.output_dim}"
            )


# ---------------------------------------------------------------------------
# text format
# ---------------------------------------------------------------------------

def _format(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(_format(v) for v in value)
    return str(value)


def _parse(text: str, tp: Any) -> Any:
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin is Union:
        if text.lower() == "none":
            return None
        inner = [a for a in args if a is not type(None)]
        return _parse(text, inner[0])
    if origin is tuple:
        if not text.strip():
            return ()
        return tuple(_parse(part.strip(), args[0]) for part in text.split(","))
    if tp is bool:
        lowered = text.lower()
        if lowered not in ("true", "false"):
            raise ValueError(f"expected true or false, got {text!r}")
        return lowered == "true"
    if tp is int:
        return int(text)
    if tp is float:
        return float(text)
    if isinstance(tp, type) and issubclass(tp, Enum):
        return tp(text)
    return text


def _field_types(cls: type) -> dict[str, Any]:
    return typing.get_type_hints(cls)


def _flatten(obj: Any, prefix: str = "") -> list[tuple[str, Any]]:
    items: list[tuple[str, Any]] = []
    for f in dataclasses.fields(obj):
        value = getattr(obj, f.name)
        key = f"{prefix}{f.name}"
        if dataclasses.is_dataclass(value):
            items.extend(_flatten(value, key + "."))
        else:
            items.append((key, value))
    return items


def serialize_dataclass(obj: Any) -> str:
    """Every field as ``key = value``, in declaration order."""
    return "".join(f"{key} = {_format(value)}\n" for key, value in _flatten(obj))


def _build(cls: type, overrides: dict[str, Any], lines: dict[str, int], prefix: str = "") -> Any:
    types = _field_types(cls)
    kwargs: dict[str, Any] = {}
    names = {f.name for f in dataclasses.fields(cls)}
    for f in dataclasses.fields(cls):
        tp = types[f.name]
        key = f"{prefix}{f.name}"
        if dataclasses.is_dataclass(tp):
            nested = {k: v for k, v in overrides.items() if k.startswith(key + ".")}
            if nested:
                kwargs[f.name] = _build(tp, nested, lines, key + ".")
        elif key in overrides:
            kwargs[f.name] = overrides[key]
    for key in overrides:
        head = key[len(prefix):].split(".")[0]
        if head not in names:
            raise ConfigurationError(f"line {lines[key]}: unknown key {key!r}")
    try:
        return cls(**kwargs)
    except ConfigurationError as exc:
        if str(exc).startswith("line "):
            raise
        first = min((lines[k] for k in overrides), default=0)
        raise ConfigurationError(f"line {first}: {exc}") from exc


def _resolve_type(root: type, key: str) -> Any:
    cls: Any = root
    parts = key.split(".")
    for i, part in enumerate(parts):
        types = _field_types(cls)
        if part not in types:
            return None
        tp = types[part]
        if i == len(parts) - 1:
            return None if dataclasses.is_dataclass(tp) else tp
        if not dataclasses.is_dataclass(tp):
            return None
        cls = tp
    return None


def parse_dataclass(cls: type, text: str) -> Any:
    """Build ``cls`` from ``key = value`` lines; missing keys keep their defaults."""
    overrides: dict[str, Any] = {}
    lines: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        tp = _resolve_type(cls, key)
        if tp is None:
            raise ConfigurationError(f"line {lineno}: unknown key {key!r}")
        if key in overrides:
            raise ConfigurationError(f"line {lineno}: duplicate key {key!r}")
        try:
            overrides[key] = _parse(value, tp)
        except ValueError as exc:
            raise ConfigurationError(f"line {lineno}: bad value for {key!r}: {exc}") from exc
        lines[key] = lineno
    return _build(cls, overrides, lines)


def serialize_config(cfg: ExperimentConfig) -> str:
    return serialize_dataclass(cfg)


def parse_config(text: str) -> ExperimentConfig:
    return parse_dataclass(ExperimentConfig, text)


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    path = Path(path)
    logger.info("Loading configuration from %s", path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"Cannot read configuration {path}: {exc}") from exc
    return parse_config(text)


def save_config(cfg: ExperimentConfig, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.write_text(serialize_config(cfg))
    return path
