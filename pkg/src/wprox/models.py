#!/usr/bin/env python3
"""
Parametric Families and Samplers
================================

Implicit generators g(θ, z): ℝ^ℓ → ℝ^n and the closed-form families used to
check them:

  - multilayer perceptron generators (the toy default: 2 hidden layers of
    width 32, tanh, linear output)
  - Gaussian location-scale, g(θ, z) = μ + σ ⊙ z
  - the two-point delta mixture α δ_a + (1 − α) δ_b, both as a closed-form
    model and as a generator that thresholds a scalar latent at its α-quantile
  - constant and identity generators

Latents come from a :class:`LatentSource` whose draws are addressed by
``(seed, stream, counter)``. Every :class:`SampleBatch` records that address so
the identical latent batch can be replayed at another θ (common random
numbers). Targets for training runs are described by :class:`TargetSpec`.

Author: wprox developers
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Any, Optional

import numpy as np
from scipy.special import ndtri

from wprox import autodiff as ad
from wprox.autodiff import DiffFunction, Operand
from wprox.exceptions import ConfigurationError, UsageError
from wprox.params import ParamVector
from wprox.transport import DiscreteMeasure

logger = logging.getLogger(__name__)

ACTIVATIONS = ("tanh", "relu", "leaky_relu", "sigmoid", "linear")
LATENT_DISTRIBUTIONS = ("normal", "uniform")
GENERATOR_KINDS = ("mlp", "location_scale", "constant", "identity", "delta_mixture")
TARGET_KINDS = ("delta_mixture", "gaussian_1d", "ring_2d")


# ---------------------------------------------------------------------------
# networks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NetworkSpec:
    """Fully connected network: widths, hidden activation, output activation."""

    input_dim: int
    output_dim: int
    hidden: tuple[int, ...] = (32, 32)
    activation: str = "tanh"
    output_activation: str = "linear"
    leaky_slope: float = 0.2

    def __post_init__(self) -> None:
        object.__setattr__(self, "hidden", tuple(int(w) for w in self.hidden))
        if self.input_dim < 1 or self.output_dim < 1:
            raise ConfigurationError(
                f"Network dimensions must be >= 1, got {self.input_dim}->{self.output_dim}"
            )
        if any(w < 1 for w in self.hidden):
            raise ConfigurationError(f"Hidden widths must be >= 1, got {self.hidden}")
        for name in (self.activation, self.output_activation):
            if name not in ACTIVATIONS:
                raise ConfigurationError(f"Unknown activation {name!r}; expected one of {ACTIVATIONS}")

    @property
    def widths(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden, self.output_dim)

    def layout(self) -> list[tuple[str, tuple[int, ...]]]:
        shapes: list[tuple[str, tuple[int, ...]]] = []
        widths = self.widths
        for i in range(len(widths) - 1):
            shapes.append((f"W{i}", (widths[i], widths[i + 1])))
            shapes.append((f"b{i}", (widths[i + 1],)))
        return shapes

    def param_count(self) -> int:
        return sum(int(np.prod(shape)) for _, shape in self.layout())

    def init(self, seed: int = 0) -> ParamVector:
        """Weights ~ N(0, 1/fan_in), biases zero."""
        rng = np.random.default_rng([seed, 7])
        chunks = []
        for name, shape in self.layout():
            if name.startswith("W"):
                chunks.append(rng.normal(0.0, 1.0 / np.sqrt(shape[0]), size=shape).ravel())
            else:
                chunks.append(np.zeros(shape[0]))
        return ParamVector.from_shapes(self.layout(), np.concatenate(chunks))

    def _activate(self, x: Operand, name: str) -> Operand:
        if name == "tanh":
            return ad.tanh(x)
        if name == "relu":
            return ad.relu(x)
        if name == "leaky_relu":
            return ad.leaky_relu(x, self.leaky_slope)
        if name == "sigmoid":
            return ad.sigmoid(x)
        return x

    def apply(self, theta: Operand, x: Operand, layout: Optional[tuple] = None) -> Operand:
        """Forward pass on a batch ``x`` of shape (B, input_dim)."""
        if layout is None:
            layout = ParamVector.from_shapes(self.layout()).layout
        blocks = ad.split_params(theta, layout)
        h = x
        n_layers = len(self.widths) - 1
        for i in range(n_layers):
            h = ad.add(ad.matmul(h, blocks[f"W{i}"]), blocks[f"b{i}"])
            h = self._activate(h, self.activation if i < n_layers - 1 else self.output_activation)
        return h


# ---------------------------------------------------------------------------
# latents and batches
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LatentProvenance:
    """Address of one latent draw: enough to regenerate it bit for bit."""

    seed: int
    stream: int
    counter: int
    batch_size: int
    distribution: str
    dim: int


@dataclass(frozen=True, eq=False)
class LatentBatch:
    values: np.ndarray
    provenance: LatentProvenance


def _draw_latents(p: LatentProvenance) -> np.ndarray:
    rng = np.random.default_rng([p.seed, p.stream, p.counter])
    if p.distribution == "normal":
        return rng.standard_normal((p.batch_size, p.dim))
    return rng.uniform(-1.0, 1.0, size=(p.batch_size, p.dim))


@dataclass
class LatentSource:
    """
    Reproducible latent sampler.

    Draw ``k`` of a source is a pure function of ``(seed, stream, k)``. The
    counter is private mutable state, so a source must not be shared between
    concurrent consumers; :meth:`clone` forks it at the current position.
    """

    dim: int
    distribution: str = "normal"
    seed: int = 0
    stream: int = 0
    counter: int = 0

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ConfigurationError(f"Latent dimension must be >= 1, got {self.dim}")
        if self.distribution not in LATENT_DISTRIBUTIONS:
            raise ConfigurationError(
                f"Unknown latent distribution {self.distribution!r}; expected one of {LATENT_DISTRIBUTIONS}"
            )
        if not 0 <= self.seed < 2**64:
            raise ConfigurationError(f"Seed must be a 64-bit unsigned integer, got {self.seed}")

    def draw(self, batch_size: int) -> LatentBatch:
        if batch_size < 1:
            raise ConfigurationError(f"Batch size must be >= 1, got {batch_size}")
        p = LatentProvenance(
            self.seed, self.stream, self.counter, batch_size, self.distribution, self.dim
        )
        self.counter += 1
        return LatentBatch(_draw_latents(p), p)

    def replay(self, provenance: LatentProvenance) -> LatentBatch:
        if provenance.dim != self.dim or provenance.distribution != self.distribution:
            raise UsageError("Provenance was produced by an incompatible latent source")
        return LatentBatch(_draw_latents(provenance), provenance)

    def clone(self) -> "LatentSource":
        return replace(self)

    def fork(self, stream: int) -> "LatentSource":
        """Independent source on another stream, counter reset."""
        return replace(self, stream=stream, counter=0)


@dataclass(frozen=True, eq=False)
class SampleBatch:
    """
    B×n samples. ``provenance`` is the latent address for generated batches and
    None for data batches; ``theta`` records the parameters that produced them.
    """

    values: np.ndarray
    provenance: Optional[LatentProvenance] = None
    theta: Optional[ParamVector] = None

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim == 1:
            values = values.reshape(-1, 1)
        if values.ndim != 2 or values.shape[0] < 1:
            raise ConfigurationError(f"Sample batch must be a nonempty B×n matrix, got {values.shape}")
        object.__setattr__(self, "values", values)

    @property
    def batch_size(self) -> int:
        return int(self.values.shape[0])

    @property
    def dim(self) -> int:
        return int(self.values.shape[1])

    def is_paired_with(self, other: "SampleBatch") -> bool:
        return (
            self.provenance is not None
            and self.provenance == other.provenance
            and self.values.shape == other.values.shape
        )


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Generator:
    """
    Implicit model g(θ, z).

    Parameters
    ----------
    kind : str
        One of ``GENERATOR_KINDS``.
    latent_dim, output_dim : int
        ℓ and n.
    theta : ParamVector
        Current parameters.
    network : NetworkSpec, optional
        Required for ``kind="mlp"``.
    alpha : float
        Mixture ratio for ``kind="delta_mixture"``.
    latent_distribution : str
        Law of z; fixes the quantile threshold of the delta-mixture generator.
    reparam : np.ndarray, optional
        Square matrix R; the model is evaluated at ``R @ theta``, so ``theta``
        is a linear reparametrization of the base family.
    """

    kind: str
    latent_dim: int
    output_dim: int
    theta: ParamVector
    network: Optional[NetworkSpec] = None
    alpha: float = 0.5
    latent_distribution: str = "normal"
    reparam: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.kind not in GENERATOR_KINDS:
            raise ConfigurationError(f"Unknown generator kind {self.kind!r}; expected one of {GENERATOR_KINDS}")
        if self.latent_dim < 1 or self.output_dim < 1:
            raise ConfigurationError(
                f"Generator needs latent_dim >= 1 and output_dim >= 1, got {self.latent_dim}, {self.output_dim}"
            )
        if self.latent_distribution not in LATENT_DISTRIBUTIONS:
            raise ConfigurationError(f"Unknown latent distribution {self.latent_distribution!r}")
        expected = self._expected_length()
        if len(self.theta) != expected:
            raise ConfigurationError(
                f"{self.kind} generator needs {expected} parameters, got {len(self.theta)}"
            )
        if self.kind == "mlp" and (
            self.network is None
            or self.network.input_dim != self.latent_dim
            or self.network.output_dim != self.output_dim
        ):
            raise ConfigurationError("mlp generator needs a NetworkSpec matching its dimensions")
        if self.kind == "delta_mixture":
            if self.latent_dim != 1 or self.output_dim != 1:
                raise ConfigurationError("delta_mixture generator is 1-D in and out")
            if not 0.0 <= self.alpha <= 1.0:
                raise ConfigurationError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.reparam is not None:
            r = np.array(self.reparam, dtype=np.float64)
            if r.shape != (expected, expected):
                raise ConfigurationError(f"Reparametrization must be {expected}x{expected}, got {r.shape}")
            r.setflags(write=False)
            object.__setattr__(self, "reparam", r)

    def _expected_length(self) -> int:
        if self.kind == "mlp":
            return self.network.param_count() if self.network is not None else -1
        if self.kind == "location_scale":
            return 2 * self.output_dim
        if self.kind == "constant":
            return self.output_dim
        if self.kind == "delta_mixture":
            return 2
        return 0

    # ------------------------------------------------------------------
    # construction
    # ------------------------------------------------------------------

    @classmethod
    def mlp(
        cls,
        latent_dim: int,
        output_dim: int,
        hidden: tuple[int, ...] = (32, 32),
        activation: str = "tanh",
        seed: int = 0,
        latent_distribution: str = "normal",
    ) -> "Generator":
        net = NetworkSpec(latent_dim, output_dim, hidden, activation, "linear")
        return cls("mlp", latent_dim, output_dim, net.init(seed), network=net,
                   latent_distribution=latent_distribution)

    @classmethod
    def location_scale(cls, mu: Any, sigma: Any, reparam: Optional[np.ndarray] = None) -> "Generator":
        mu = np.atleast_1d(np.asarray(mu, dtype=np.float64))
        sigma = np.atleast_1d(np.asarray(sigma, dtype=np.float64))
        if mu.shape != sigma.shape:
            raise ConfigurationError(f"mu and sigma shapes differ: {mu.shape} vs {sigma.shape}")
        n = mu.size
        base = np.concatenate([mu, sigma])
        values = base if reparam is None else np.linalg.solve(reparam, base)
        theta = ParamVector.from_shapes([("mu", (n,)), ("sigma", (n,))], values)
        return cls("location_scale", n, n, theta, reparam=reparam)

    @classmethod
    def constant(cls, values: Any, latent_dim: int = 1) -> "Generator":
        values = np.atleast_1d(np.asarray(values, dtype=np.float64))
        return cls("constant", latent_dim, values.size, ParamVector.flat(values, "c"))

    @classmethod
    def identity(cls, dim: int) -> "Generator":
        return cls("identity", dim, dim, ParamVector.from_shapes([]))

    @classmethod
    def delta_mixture(
        cls, a: float, b: float, alpha: float = 0.5, latent_distribution: str = "normal"
    ) -> "Generator":
        theta = ParamVector.from_shapes([("a", ()), ("b", ())], [a, b])
        return cls("delta_mixture", 1, 1, theta, alpha=alpha, latent_distribution=latent_distribution)

    def with_theta(self, values: Any) -> "Generator":
        if isinstance(values, ParamVector):
            values = values.values
        return replace(self, theta=self.theta.with_values(values))

    # ------------------------------------------------------------------
    # evaluation
    # ------------------------------------------------------------------

    @property
    def param_length(self) -> int:
        return len(self.theta)

    def delta_threshold(self) -> float:
        """α-quantile of the latent law; z below it maps to a."""
        if self.latent_distribution == "normal":
            return float(ndtri(self.alpha))
        return 2.0 * self.alpha - 1.0

    def rule(self, theta: Operand, z: Any) -> Operand:
        """g(θ, z) built from differentiable primitives; ``z`` is (B, ℓ)."""
        z = np.asarray(z, dtype=np.float64).reshape(-1, self.latent_dim)
        if self.reparam is not None:
            theta = ad.matmul(self.reparam, theta)
        n = self.output_dim
        if self.kind == "mlp":
            return self.network.apply(theta, z, self.theta.layout)
        if self.kind == "location_scale":
            mu = ad.getitem(theta, slice(0, n))
            sigma = ad.getitem(theta, slice(n, 2 * n))
            return ad.add(mu, ad.mul(sigma, z))
        if self.kind == "constant":
            return ad.add(ad.reshape(theta, (1, n)), np.zeros((z.shape[0], n)))
        if self.kind == "delta_mixture":
            upper = (z >= self.delta_threshold()).astype(np.float64)
            a = ad.getitem(theta, slice(0, 1))
            b = ad.getitem(theta, slice(1, 2))
            return ad.add(ad.mul(a, 1.0 - upper), ad.mul(b, upper))
        return z.copy()

    def forward(self, z: Any, theta: Any = None) -> np.ndarray:
        values = self.theta.values if theta is None else _values(theta)
        return self.as_function()(values, z).reshape(-1, self.output_dim)

    def as_function(self) -> DiffFunction:
        return DiffFunction(
            rule=self.rule,
            param_length=self.param_length,
            input_shape=(-1, self.latent_dim),
            output_shape=None,
            name=f"generator[{self.kind}]",
        )


def _values(theta: Any) -> np.ndarray:
    if isinstance(theta, ParamVector):
        return theta.values
    return np.asarray(theta, dtype=np.float64).reshape(-1)


def sample(gen: Generator, src: LatentSource, batch_size: int) -> SampleBatch:
    """Draw ``batch_size`` latents from ``src`` and push them through ``gen``."""
    if src.dim != gen.latent_dim:
        raise ConfigurationError(f"Latent source dim {src.dim} != generator latent dim {gen.latent_dim}")
    return sample_from(gen, src.draw(batch_size))


def sample_from(gen: Generator, latents: LatentBatch, theta: Any = None) -> SampleBatch:
    """Push a given latent batch through ``gen`` (at ``theta`` if given)."""
    params = gen.theta if theta is None else gen.theta.with_values(_values(theta))
    values = gen.forward(latents.values, params)
    return SampleBatch(values, latents.provenance, params)


# ---------------------------------------------------------------------------
# closed-form families
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DeltaMixtureModel:
    """ρ(θ) = α δ_a + (1 − α) δ_b with θ = (a, b), a < b."""

    a: float
    b: float
    alpha: float = 0.5

    def __post_init__(self) -> None:
        if not self.a < self.b:
            raise ConfigurationError(f"Delta mixture needs a < b, got a={self.a}, b={self.b}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigurationError(f"alpha must lie in [0, 1], got {self.alpha}")

    @property
    def theta(self) -> np.ndarray:
        return np.array([self.a, self.b])

    @classmethod
    def from_theta(cls, theta: Any, alpha: float) -> "DeltaMixtureModel":
        a, b = _values(theta)
        return cls(float(a), float(b), alpha)

    def as_generator(self, latent_distribution: str = "normal") -> Generator:
        return Generator.delta_mixture(self.a, self.b, self.alpha, latent_distribution)


@dataclass(frozen=True)
class GaussianLocationScale:
    """N(μ, diag σ²) realized as g(θ, z) = μ + σ ⊙ z."""

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self) -> None:
        mu = np.atleast_1d(np.asarray(self.mu, dtype=np.float64))
        sigma = np.atleast_1d(np.asarray(self.sigma, dtype=np.float64))
        if mu.shape != sigma.shape:
            raise ConfigurationError(f"mu and sigma shapes differ: {mu.shape} vs {sigma.shape}")
        if np.any(sigma <= 0):
            raise ConfigurationError(f"sigma must be positive, got {sigma}")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    def as_generator(self) -> Generator:
        return Generator.location_scale(self.mu, self.sigma)

    def w2sq(self, other: "GaussianLocationScale") -> float:
        """Exact squared W2 between diagonal Gaussians."""
        return float(np.sum((self.mu - other.mu) ** 2) + np.sum((self.sigma - other.sigma) ** 2))


def delta_mixture_density_pushforward(m: DeltaMixtureModel) -> DiscreteMeasure:
    """The two-point measure {(a, α), (b, 1 − α)}."""
    return DiscreteMeasure(np.array([[m.a], [m.b]]), np.array([m.alpha, 1.0 - m.alpha]))


# ---------------------------------------------------------------------------
# targets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TargetSpec:
    """
    Desk-scale data distribution.

    ``delta_mixture`` uses (a, b, alpha); ``gaussian_1d`` uses (mean, std);
    ``ring_2d`` places ``components`` equally weighted Gaussians of scale
    ``component_std`` on a circle of ``radius``.
    """

    kind: str = "ring_2d"
    a: float = -1.2
    b: float = 2.1
    alpha: float = 0.5
    mean: float = 0.0
    std: float = 1.0
    components: int = 8
    radius: float = 2.0
    component_std: float = 0.05
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in TARGET_KINDS:
            raise ConfigurationError(f"Unknown target kind {self.kind!r}; expected one of {TARGET_KINDS}")
        if self.kind == "delta_mixture":
            DeltaMixtureModel(self.a, self.b, self.alpha)
        if self.kind == "gaussian_1d" and self.std <= 0:
            raise ConfigurationError(f"Target std must be positive, got {self.std}")
        if self.kind == "ring_2d":
            if self.components < 1:
                raise ConfigurationError(f"Ring needs >= 1 component, got {self.components}")
            if self.radius < 0 or self.component_std < 0:
                raise ConfigurationError("Ring radius and component_std must be >= 0")

    @property
    def dim(self) -> int:
        return 2 if self.kind == "ring_2d" else 1

    def centers(self) -> np.ndarray:
        angles = 2.0 * np.pi * np.arange(self.components) / self.components
        return self.radius * np.column_stack([np.cos(angles), np.sin(angles)])

    def sample(self, batch_size: int, draw_index: int = 0, stream: int = 3) -> SampleBatch:
        """Batch ``draw_index`` of the target; a pure function of the arguments and ``seed``."""
        if batch_size < 1:
            raise ConfigurationError(f"Batch size must be >= 1, got {batch_size}")
        rng = np.random.default_rng([self.seed, stream, draw_index])
        if self.kind == "delta_mixture":
            upper = rng.uniform(size=batch_size) >= self.alpha
            values = np.where(upper, self.b, self.a).reshape(-1, 1)
        elif self.kind == "gaussian_1d":
            values = self.mean + self.std * rng.standard_normal((batch_size, 1))
        else:
            labels = rng.integers(self.components, size=batch_size)
            values = self.centers()[labels] + self.component_std * rng.standard_normal((batch_size, 2))
        return SampleBatch(values)

    def delta_model(self) -> DeltaMixtureModel:
        if self.kind != "delta_mixture":
            raise UsageError(f"Target {self.kind!r} is not a delta mixture")
        return DeltaMixtureModel(self.a, self.b, self.alpha)


# ---------------------------------------------------------------------------
# objectives with closed forms
# ---------------------------------------------------------------------------

def gaussian_w2sq_objective(target_mean: float, target_std: float) -> DiffFunction:
    """F(μ, σ) = (μ − m)² + (σ − s)², the exact W2² to N(m, s²) for σ > 0."""
    target = np.array([target_mean, target_std], dtype=np.float64)

    def rule(theta: Operand, _inputs: Any) -> Operand:
        return ad.sum_(ad.square(ad.sub(theta, target)))

    return DiffFunction(rule, param_length=2, name="gaussian_w2sq")


def shared_latent_w2sq_objective(
    gen: Generator, target_mean: Any, target_std: Any, latents: LatentBatch
) -> DiffFunction:
    """
    Mean of ‖g(θ, z) − (m + s ⊙ z)‖² over a fixed latent batch.

    For a location-scale generator with positive scales this is the W2² to
    N(m, s²) estimated under the monotone coupling.
    """
    m = np.atleast_1d(np.asarray(target_mean, dtype=np.float64))
    s = np.atleast_1d(np.asarray(target_std, dtype=np.float64))
    z = latents.values
    reference = m + s * z

    def rule(theta: Operand, _inputs: Any) -> Operand:
        diff = ad.sub(gen.rule(theta, z), reference)
        return ad.mean(ad.sum_(ad.square(diff), axis=1))

    return DiffFunction(rule, param_length=gen.param_length, name="shared_latent_w2sq")
