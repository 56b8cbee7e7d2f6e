#!/usr/bin/env python3
"""
Desk-Scale Adversarial Training
===============================

Discriminator and potential networks, the vanilla GAN losses with the
non-saturating generator loss, a discriminator-free W1 loss, and the two
training loops:

  train_algorithm1   one discriminator update, then ℓ generator updates each
                     penalized by D̃(θ, θ^{k−1})² / (2h)
  train_algorithm2   adds a potential network Φ_p fitted between the current
                     generator and the previous snapshot; generator updates are
                     penalized by (1/h) E[Φ_p(g_θ(z)) − Φ_p(g_{θ^{k−1}}(z))
                     − ½‖∇Φ_p(g_{θ^{k−1}}(z))‖²]

An outer iteration is one discriminator phase followed by the generator
phase. Latent draws come from separate streams of one seed: stream 0 for
discriminator and generator batches, stream 1 for potential batches, stream 2
for evaluation.

Author: wprox developers
"""

import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np
import pandas as pd

from wprox import autodiff as ad
from wprox.autodiff import DiffFunction, Operand, grad_scalar
from wprox.evaluation import evaluate_metric
from wprox.exceptions import ConfigurationError, DivergenceError, UnsupportedDimensionError
from wprox.metric import PenaltyKind, ProximalPenalty
from wprox.models import Generator, LatentBatch, LatentSource, NetworkSpec, SampleBatch, TargetSpec
from wprox.optim import FlowConfig, InnerOptimizer, penalized, proximal_solve
from wprox.params import ParamVector
from wprox.transport import empirical_w1

logger = logging.getLogger(__name__)

CLAMP = 1e-7
LOSS_MODES = ("vanilla", "direct_w1")
POTENTIAL_KINDS = ("linear", "quadratic_diag", "mlp")
TRAIN_COLUMNS = ["outer_iter", "disc_loss", "gen_loss", "penalty", "eval_metric", "wallclock_s"]

GEN_STREAM = 0
POTENTIAL_STREAM = 1
EVAL_STREAM = 2


def _values(x: Any) -> np.ndarray:
    if isinstance(x, SampleBatch):
        return x.values
    if isinstance(x, ParamVector):
        return x.values
    return np.asarray(x, dtype=np.float64)


# ---------------------------------------------------------------------------
# networks
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Discriminator:
    """f_ω: ℝ^n → [ε, 1 − ε], leaky-ReLU hidden layers and a sigmoid output."""

    network: NetworkSpec
    omega: ParamVector

    def __post_init__(self) -> None:
        if self.network.output_dim != 1 or self.network.output_activation != "sigmoid":
            raise ConfigurationError("Discriminator network needs a single sigmoid output")
        if len(self.omega) != self.network.param_count():
            raise ConfigurationError(
                f"Discriminator needs {self.network.param_count()} parameters, got {len(self.omega)}"
            )

    @classmethod
    def mlp(
        cls, input_dim: int, hidden: tuple[int, ...] = (32, 32), leaky_slope: float = 0.2, seed: int = 0
    ) -> "Discriminator":
        net = NetworkSpec(input_dim, 1, hidden, "leaky_relu", "sigmoid", leaky_slope)
        return cls(net, net.init(seed))

    def rule(self, omega: Operand, x: Any) -> Operand:
        """Clamped probabilities, shape (B,)."""
        out = self.network.apply(omega, x, self.omega.layout)
        return ad.reshape(ad.clip(out, CLAMP, 1.0 - CLAMP), (-1,))

    def probabilities(self, x: Any, omega: Any = None) -> np.ndarray:
        params = self.omega.values if omega is None else _values(omega)
        return np.asarray(self.rule(params, _values(x)))

    def with_omega(self, values: np.ndarray) -> "Discriminator":
        return Discriminator(self.network, self.omega.with_values(values))


@dataclass(frozen=True, eq=False)
class PotentialNetwork:
    """
    Φ_p: ℝ^n → ℝ with a closed-form spatial gradient.

    linear          Φ(x) = aᵀx
    quadratic_diag  Φ(x) = aᵀx + ½ Σ q_i x_i²
    mlp             Φ(x) = w2ᵀ tanh(W1ᵀx + b1)

    The constant term is omitted; it cancels in every difference of Φ values.
    """

    kind: str
    dim: int
    p: ParamVector
    width: int = 32

    def __post_init__(self) -> None:
        if self.kind not in POTENTIAL_KINDS:
            raise ConfigurationError(f"Unknown potential kind {self.kind!r}; expected one of {POTENTIAL_KINDS}")
        expected = {"linear": self.dim, "quadratic_diag": 2 * self.dim,
                    "mlp": self.dim * self.width + 2 * self.width}[self.kind]
        if len(self.p) != expected:
            raise ConfigurationError(f"{self.kind} potential needs {expected} parameters, got {len(self.p)}")

    @classmethod
    def create(cls, kind: str, dim: int, width: int = 32, seed: int = 0) -> "PotentialNetwork":
        if kind == "linear":
            p = ParamVector.from_shapes([("a", (dim,))])
        elif kind == "quadratic_diag":
            p = ParamVector.from_shapes([("a", (dim,)), ("q", (dim,))])
        else:
            shapes = [("W1", (dim, width)), ("b1", (width,)), ("w2", (width,))]
            rng = np.random.default_rng([seed, 11])
            values = np.concatenate([
                rng.normal(0.0, 1.0 / np.sqrt(dim), size=dim * width),
                np.zeros(width),
                rng.normal(0.0, 0.1 / np.sqrt(width), size=width),
            ])
            p = ParamVector.from_shapes(shapes, values)
        return cls(kind, dim, p, width)

    def with_p(self, values: np.ndarray) -> "PotentialNetwork":
        return PotentialNetwork(self.kind, self.dim, self.p.with_values(values), self.width)

    def value(self, p: Operand, x: Operand) -> Operand:
        """Φ_p(x), shape (B,)."""
        blocks = ad.split_params(p, self.p.layout)
        if self.kind == "mlp":
            hidden = ad.tanh(ad.add(ad.matmul(x, blocks["W1"]), blocks["b1"]))
            return ad.matmul(hidden, blocks["w2"])
        out = ad.matmul(x, blocks["a"])
        if self.kind == "quadratic_diag":
            out = ad.add(out, ad.mul(0.5, ad.matmul(ad.square(x), blocks["q"])))
        return out

    def spatial_gradient(self, p: Operand, x: Operand) -> Operand:
        """∇_x Φ_p(x), shape (B, n)."""
        blocks = ad.split_params(p, self.p.layout)
        batch = ad.value_of(x).shape[0]
        if self.kind == "mlp":
            hidden = ad.tanh(ad.add(ad.matmul(x, blocks["W1"]), blocks["b1"]))
            slope = ad.mul(ad.sub(1.0, ad.square(hidden)), blocks["w2"])
            return ad.matmul(slope, ad.transpose(blocks["W1"]))
        grad = ad.add(ad.reshape(blocks["a"], (1, self.dim)), np.zeros((batch, self.dim)))
        if self.kind == "quadratic_diag":
            grad = ad.add(grad, ad.mul(x, blocks["q"]))
        return grad

    def objective(self, p: Operand, x: Operand, y: Any, ytilde: Any = None) -> Operand:
        """J(p) = E[Φ(x) − Φ(y) − ½‖∇Φ(ỹ)‖²]; 2·sup_p J is the learned D̃²."""
        ytilde = y if ytilde is None else ytilde
        gap = ad.sub(self.value(p, x), self.value(p, y))
        norm = ad.sum_(ad.square(self.spatial_gradient(p, ytilde)), axis=1)
        return ad.mean(ad.sub(gap, ad.mul(0.5, norm)))


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------

def _disc_loss_rule(disc: Discriminator, omega: Operand, real: Any, fake: Any) -> Operand:
    on_real = ad.log(disc.rule(omega, real))
    on_fake = ad.log(ad.sub(1.0, disc.rule(omega, fake)))
    return ad.neg(ad.add(ad.mean(on_real), ad.mean(on_fake)))


def _gen_loss_rule(disc: Discriminator, omega: Any, fake: Operand) -> Operand:
    return ad.neg(ad.mean(ad.log(disc.rule(omega, fake))))


def disc_loss_function(disc: Discriminator, real: Any, fake: Any) -> DiffFunction:
    """ω ↦ discriminator loss on fixed real and fake batches."""
    real, fake = _values(real), _values(fake)

    def rule(omega: Operand, _inputs: Any) -> Operand:
        return _disc_loss_rule(disc, omega, real, fake)

    return DiffFunction(rule, len(disc.omega), name="disc_loss")


def generator_loss_function(disc: Discriminator, omega: Any, gen: Generator, z: Any) -> DiffFunction:
    """θ ↦ non-saturating generator loss on a fixed latent batch, ω held fixed."""
    omega = _values(omega).copy()
    z = _values(z)

    def rule(theta: Operand, _inputs: Any) -> Operand:
        return _gen_loss_rule(disc, omega, gen.rule(theta, z))

    return DiffFunction(rule, gen.param_length, name="gen_loss")


def disc_loss(disc: Discriminator, real: Any, fake: Any) -> float:
    """−E log f_ω(x) − E log(1 − f_ω(g_θ(z))), to be minimized over ω."""
    return float(_disc_loss_rule(disc, disc.omega.values, _values(real), _values(fake)))


def gen_loss_nonsaturating(disc: Discriminator, fake: Any) -> float:
    """−E log f_ω(g_θ(z))."""
    return float(_gen_loss_rule(disc, disc.omega.values, _values(fake)))


def direct_w1_loss(
    gen: Generator,
    theta: Any,
    target: TargetSpec,
    batch_size: int,
    seed: int = 0,
    draw_index: int = 0,
) -> float:
    """Empirical W1 between ``batch_size`` generated and target samples (n ≤ 2)."""
    if gen.output_dim > 2:
        raise UnsupportedDimensionError(f"Direct W1 loss supports n <= 2, got n={gen.output_dim}")
    src = LatentSource(gen.latent_dim, gen.latent_distribution, seed=seed, stream=GEN_STREAM, counter=draw_index)
    fake = gen.forward(src.draw(batch_size).values, _values(theta))
    real = target.sample(batch_size, draw_index=draw_index).values
    return float(empirical_w1(fake, real))


# ---------------------------------------------------------------------------
# configuration and logs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    """Knobs of both training loops; ``h = inf`` disables the proximal term."""

    batch_size: int = 64
    outer_iterations: int = 2000
    generator_iterations: int = 5
    discriminator_iterations: int = 1
    potential_iterations: int = 0
    generator_optimizer: InnerOptimizer = field(default_factory=lambda: InnerOptimizer("adam", 1e-3, 0.5, 0.999))
    discriminator_optimizer: InnerOptimizer = field(default_factory=lambda: InnerOptimizer("adam", 1e-3, 0.5, 0.999))
    potential_optimizer: InnerOptimizer = field(default_factory=lambda: InnerOptimizer("adam", 1e-2, 0.5, 0.999))
    penalty: ProximalPenalty = field(default_factory=ProximalPenalty)
    h: float = 0.2
    seed: int = 0
    loss_mode: str = "vanilla"
    eval_every: int = 50
    eval_batch: int = 512
    eval_metric: str = "frechet-gaussian"
    resample_latents: bool = True
    potential_kind: str = "mlp"
    potential_width: int = 32
    record_params: bool = False
    divergence_factor: float = 50.0

    def __post_init__(self) -> None:
        for name in ("batch_size", "outer_iterations", "generator_iterations",
                     "discriminator_iterations", "eval_every", "eval_batch", "potential_width"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.potential_iterations < 0:
            raise ConfigurationError(f"potential_iterations must be >= 0, got {self.potential_iterations}")
        if not self.h > 0:
            raise ConfigurationError(f"h must be positive, got {self.h}")
        if self.loss_mode not in LOSS_MODES:
            raise ConfigurationError(f"Unknown loss mode {self.loss_mode!r}; expected one of {LOSS_MODES}")
        if self.potential_kind not in POTENTIAL_KINDS:
            raise ConfigurationError(f"Unknown potential kind {self.potential_kind!r}")
        if not self.divergence_factor > 1:
            raise ConfigurationError(f"divergence_factor must exceed 1, got {self.divergence_factor}")

    @property
    def penalty_active(self) -> bool:
        return math.isfinite(self.h) and self.penalty.kind is not PenaltyKind.NONE


@dataclass
class TrainLog:
    """Per-outer-iteration rows plus the final networks."""

    rows: list[dict[str, float]]
    generator: Generator
    discriminator: Optional[Discriminator] = None
    potential: Optional[PotentialNetwork] = None
    param_trace: list[np.ndarray] = field(default_factory=list)
    columns: list[str] = field(default_factory=lambda: list(TRAIN_COLUMNS))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=self.columns)

    def to_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        self.to_frame().to_csv(path, index=False)
        logger.info("Wrote training log (%d rows) to %s", len(self.rows), path)
        return path

    def eval_series(self) -> pd.DataFrame:
        frame = self.to_frame()
        return frame.dropna(subset=["eval_metric"])[["outer_iter", "eval_metric", "wallclock_s"]]


# ---------------------------------------------------------------------------
# training loops
# ---------------------------------------------------------------------------

class _Loop:
    """Shared state of one training run."""

    def __init__(self, gen: Generator, disc: Optional[Discriminator], target: TargetSpec, cfg: TrainConfig):
        if target.dim != gen.output_dim:
            raise ConfigurationError(f"Target dim {target.dim} != generator output dim {gen.output_dim}")
        if cfg.loss_mode == "vanilla" and disc is None:
            raise ConfigurationError("Vanilla loss mode needs a discriminator")
        if disc is not None and disc.network.input_dim != gen.output_dim:
            raise ConfigurationError("Discriminator input dim does not match generator output dim")
        if cfg.loss_mode == "direct_w1" and gen.output_dim > 2:
            raise UnsupportedDimensionError(f"Direct W1 loss supports n <= 2, got n={gen.output_dim}")
        cfg.penalty.check_model(gen)
        self.gen = gen
        self.disc = disc
        self.target = target
        self.cfg = cfg
        self.latents = LatentSource(gen.latent_dim, gen.latent_distribution, seed=cfg.seed, stream=GEN_STREAM)
        self.eval_latents = self.latents.fork(EVAL_STREAM)
        self.theta = gen.theta.values.copy()
        self.omega = disc.omega.values.copy() if disc is not None else np.zeros(0)
        self.gen_state = cfg.generator_optimizer.init(self.theta.size)
        self.disc_state = cfg.discriminator_optimizer.init(self.omega.size)
        self.real_draws = 0
        self.started = time.monotonic()
        self.first_objective: Optional[float] = None
        self.history: list[float] = []

    def real_batch(self) -> np.ndarray:
        batch = self.target.sample(self.cfg.batch_size, draw_index=self.real_draws)
        self.real_draws += 1
        return batch.values

    def discriminator_phase(self) -> float:
        if self.cfg.loss_mode != "vanilla":
            return math.nan
        loss = math.nan
        for _ in range(self.cfg.discriminator_iterations):
            real = self.real_batch()
            fake = self.gen.forward(self.latents.draw(self.cfg.batch_size).values, self.theta)
            loss, grad = grad_scalar(disc_loss_function(self.disc, real, fake), self.omega)
            self.omega, self.disc_state = self.cfg.discriminator_optimizer.update(self.omega, grad, self.disc_state)
        return loss

    def generator_loss(self, z: np.ndarray) -> DiffFunction:
        if self.cfg.loss_mode == "vanilla":
            return generator_loss_function(self.disc, self.omega, self.gen, z)
        gen = self.gen
        real = self.real_batch()

        def rule(theta: Operand, _inputs: Any) -> Operand:
            return empirical_w1(gen.rule(theta, z), real)

        return DiffFunction(rule, gen.param_length, name="gen_w1_loss")

    def generator_step(self, loss: DiffFunction, penalty_fn: Optional[DiffFunction], weight: float) -> float:
        value, grad = grad_scalar(penalized(loss, penalty_fn, weight), self.theta)
        self._guard(value)
        self.theta, self.gen_state = self.cfg.generator_optimizer.update(self.theta, grad, self.gen_state)
        return value

    def _guard(self, value: float) -> None:
        if self.first_objective is None:
            self.first_objective = value
        self.history.append(value)
        if value > self.cfg.divergence_factor * max(abs(self.first_objective), 1.0):
            raise DivergenceError(
                f"Generator objective {value:.6g} exceeded {self.cfg.divergence_factor:g}x "
                f"its starting value {self.first_objective:.6g}",
                trace=self.history,
            )

    def evaluate(self, k: int) -> float:
        cfg = self.cfg
        if (k + 1) % cfg.eval_every != 0 and k != cfg.outer_iterations - 1:
            return math.nan
        fake = self.gen.forward(self.eval_latents.draw(cfg.eval_batch).values, self.theta)
        real = self.target.sample(cfg.eval_batch, draw_index=k, stream=4).values
        return evaluate_metric(cfg.eval_metric, fake, real)

    def row(self, k: int, d_loss: float, g_loss: float, pen: float, metric: float) -> dict[str, float]:
        return {
            "outer_iter": k,
            "disc_loss": d_loss,
            "gen_loss": g_loss,
            "penalty": pen,
            "eval_metric": metric,
            "wallclock_s": round(time.monotonic() - self.started, 3),
        }

    def final_generator(self) -> Generator:
        return self.gen.with_theta(self.theta)

    def final_discriminator(self) -> Optional[Discriminator]:
        return self.disc.with_omega(self.omega) if self.disc is not None else None


def train_algorithm1(
    gen: Generator, disc: Optional[Discriminator], target: TargetSpec, cfg: TrainConfig
) -> TrainLog:
    """
    Wasserstein natural proximal training.

    Each outer iteration: sample real and latent batches and update ω; take the
    snapshot θ^{k−1} = θ; run ℓ generator updates on
    loss(θ) + D̃(θ, θ^{k−1})² / (2h), drawing a fresh latent batch per update
    (or one shared batch when ``resample_latents`` is False).
    """
    loop = _Loop(gen, disc, target, cfg)
    rows: list[dict[str, float]] = []
    trace: list[np.ndarray] = []
    weight = 1.0 / (2.0 * cfg.h)

    for k in range(cfg.outer_iterations):
        d_loss = loop.discriminator_phase()
        snapshot = loop.theta.copy()
        shared = None if cfg.resample_latents else loop.latents.draw(cfg.batch_size)
        g_loss = math.nan
        penalty_fn = None
        for _ in range(cfg.generator_iterations):
            batch = shared if shared is not None else loop.latents.draw(cfg.batch_size)
            loss = loop.generator_loss(batch.values)
            penalty_fn = cfg.penalty.as_function(gen, snapshot, batch) if cfg.penalty_active else None
            loop.generator_step(loss, penalty_fn, weight)
            g_loss = float(loss(loop.theta))
        pen = float(penalty_fn(loop.theta)) if penalty_fn is not None else 0.0
        metric = loop.evaluate(k)
        rows.append(loop.row(k, d_loss, g_loss, pen, metric))
        if cfg.record_params:
            trace.append(loop.theta.copy())
        if not math.isnan(metric):
            logger.info("outer %d: disc %.4f gen %.4f penalty %.3e %s %.4f",
                        k, d_loss, g_loss, pen, cfg.eval_metric, metric)

    return TrainLog(rows, loop.final_generator(), loop.final_discriminator(), None, trace)


def potential_penalty_function(
    pot: PotentialNetwork, p: Any, gen: Generator, theta_prev: Any, latents: LatentBatch
) -> DiffFunction:
    """θ ↦ J over Φ_p between g(θ, z) and the fixed g(θ^{k−1}, z); twice it stands in for D̃²."""
    z = latents.values
    y = gen.forward(z, _values(theta_prev))
    p_values = _values(p).copy()

    def rule(theta: Operand, _inputs: Any) -> Operand:
        return pot.objective(p_values, gen.rule(theta, z), y)

    return DiffFunction(rule, gen.param_length, name=f"potential_penalty[{pot.kind}]")


@dataclass(frozen=True)
class PotentialFit:
    potential: PotentialNetwork
    objective: float

    @property
    def penalty(self) -> float:
        """Learned D̃² = 2 · sup_p J(p)."""
        return 2.0 * self.objective


def fit_potential(
    pot: PotentialNetwork,
    x: Any,
    y: Any,
    ytilde: Any = None,
    iterations: int = 500,
    optimizer: Optional[InnerOptimizer] = None,
    solve: str = "fixed",
) -> PotentialFit:
    """
    Maximize J(p) on fixed batches, starting from ``pot.p``.

    ``solve="converge"`` runs Newton-CG to tolerance instead of ``iterations``
    optimizer steps.
    """
    x, y = _values(x), _values(y)
    ytilde = y if ytilde is None else _values(ytilde)

    def rule(p: Operand, _inputs: Any) -> Operand:
        return ad.neg(pot.objective(p, x, y, ytilde))

    negated = DiffFunction(rule, len(pot.p), name=f"neg_potential_objective[{pot.kind}]")
    cfg = FlowConfig(h=math.inf, inner_iterations=max(iterations, 1), solve=solve,
                     penalty=ProximalPenalty(PenaltyKind.NONE), divergence_factor=1e6)
    optimizer = optimizer or InnerOptimizer("adam", 1e-2, 0.5, 0.999)
    p = proximal_solve(negated, pot.p, None, cfg, optimizer)
    fitted = pot.with_p(p.values)
    return PotentialFit(fitted, -float(negated(p.values)))


def train_algorithm2(
    gen: Generator,
    disc: Optional[Discriminator],
    pot: PotentialNetwork,
    target: TargetSpec,
    cfg: TrainConfig,
) -> TrainLog:
    """
    Three-network semi-backward Euler training.

    θ^{k−1} is the generator at the start of the previous generator phase (θ₀
    for the first iteration), so the potential fitted at iteration k measures
    the most recent generator move.
    """
    if cfg.potential_iterations < 1:
        raise ConfigurationError("train_algorithm2 needs potential_iterations >= 1")
    if pot.dim != gen.output_dim:
        raise ConfigurationError(f"Potential dim {pot.dim} != generator output dim {gen.output_dim}")
    loop = _Loop(gen, disc, target, cfg)
    pot_latents = loop.latents.fork(POTENTIAL_STREAM)
    p = pot.p.values.copy()
    p_state = cfg.potential_optimizer.init(p.size)
    previous = loop.theta.copy()
    rows: list[dict[str, float]] = []
    trace: list[np.ndarray] = []
    weight = 1.0 / cfg.h if math.isfinite(cfg.h) else 0.0

    for k in range(cfg.outer_iterations):
        d_loss = loop.discriminator_phase()

        pot_value = math.nan
        for _ in range(cfg.potential_iterations):
            z = pot_latents.draw(cfg.batch_size).values
            x = gen.forward(z, loop.theta)
            y = gen.forward(z, previous)

            def neg_objective(q: Operand, _inputs: Any, x: np.ndarray = x, y: np.ndarray = y) -> Operand:
                return ad.neg(pot.objective(q, x, y))

            value, grad = grad_scalar(DiffFunction(neg_objective, p.size, name="neg_potential"), p)
            pot_value = -value
            p, p_state = cfg.potential_optimizer.update(p, grad, p_state)

        start = loop.theta.copy()
        g_loss = math.nan
        penalty_fn = None
        shared = None if cfg.resample_latents else loop.latents.draw(cfg.batch_size)
        for _ in range(cfg.generator_iterations):
            batch = shared if shared is not None else loop.latents.draw(cfg.batch_size)
            loss = loop.generator_loss(batch.values)
            penalty_fn = potential_penalty_function(pot, p, gen, previous, batch) if weight else None
            loop.generator_step(loss, penalty_fn, weight)
            g_loss = float(loss(loop.theta))
        pen = 2.0 * float(penalty_fn(loop.theta)) if penalty_fn is not None else 0.0
        previous = start

        metric = loop.evaluate(k)
        row = loop.row(k, d_loss, g_loss, pen, metric)
        row["potential_objective"] = pot_value
        rows.append(row)
        if cfg.record_params:
            trace.append(loop.theta.copy())
        if not math.isnan(metric):
            logger.info("outer %d: gen %.4f potential %.3e %s %.4f",
                        k, g_loss, pot_value, cfg.eval_metric, metric)

    return TrainLog(
        rows,
        loop.final_generator(),
        loop.final_discriminator(),
        pot.with_p(p),
        trace,
        columns=TRAIN_COLUMNS + ["potential_objective"],
    )
