#!/usr/bin/env python3
"""
Proximal Penalties and Metric Tensors
=====================================

Sample-based surrogates D̃(θ, θ^k)² of the squared Wasserstein-2 distance
between ρ_θ and ρ_{θ^k}, evaluated on a shared latent batch Z:

  rwp      E‖g(θ,Z) − g(θ^k,Z)‖²
  o1sbe    ‖E[g(θ,Z) − g(θ^k,Z)]‖²
  o2diag   dual potential Φ = aᵀx + ½ Σ q_i x_i², closed-form supremum
  affine   dual potential in the span of a polynomial basis Ψ,
           D̃² = ℓᵀ (M(θ̃) + λI)⁻¹ ℓ with ℓ = E[Ψ(x) − Ψ(y)]
  exact1d  (θ − θ^k)ᵀ G(θ̃) (θ − θ^k) with G the pulled-back metric of a 1-D model

The variational objective of the affine family is
E[Φ(x) − Φ(y)] − ½ E‖∇Φ(ỹ)‖², whose supremum over the coefficients is
½ ℓᵀ M⁻¹ ℓ; D̃² is twice that value. ỹ = g(θ̃, Z) where θ̃ is θ^k
(``Midpoint.PREVIOUS``) or (θ + θ^k)/2 (``Midpoint.AVERAGE``).

Batches from θ^k are constants: gradients flow through g(θ, Z) and, under the
average rule, through g(θ̃, Z).

Also here: metric tensors (relaxed pullback, exact 1-D, affine pullback,
delta-mixture closed form) and the closed-form divergences of the two-point
delta mixture.

Author: wprox developers
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Optional, Union

import numpy as np

from wprox import autodiff as ad
from wprox.autodiff import DiffFunction, Operand
from wprox.exceptions import (
    ConfigurationError,
    DegenerateCoordinateError,
    NumericError,
    UnsupportedDimensionError,
    UsageError,
)
from wprox.models import DeltaMixtureModel, Generator, LatentBatch, SampleBatch
from wprox.params import ParamVector

logger = logging.getLogger(__name__)

VARIANCE_FLOOR = 1e-12
AUTO_DAMPING_SCALE = 1e-8


class PenaltyKind(str, Enum):
    RWP = "rwp"
    O1SBE = "o1sbe"
    O2DIAG = "o2diag"
    AFFINE = "affine"
    EXACT1D = "exact1d"
    NONE = "none"


class Midpoint(str, Enum):
    AVERAGE = "average"
    PREVIOUS = "previous"


# ---------------------------------------------------------------------------
# affine bases
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AffineBasis:
    """
    Polynomial basis on ℝ^n.

    degree 1: ψ_k = x_k (K = n). degree 2 adds ½x_k² (diagonal, K = 2n) or
    ½x_k² and x_i x_j for i < j (full, K = n + n(n+1)/2).
    """

    dim: int
    degree: int = 1
    diagonal: bool = True

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ConfigurationError(f"Basis dimension must be >= 1, got {self.dim}")
        if self.degree not in (1, 2):
            raise ConfigurationError(f"Basis degree must be 1 or 2, got {self.degree}")

    def _pairs(self) -> list[tuple[int, int]]:
        if self.degree == 1:
            return []
        if self.diagonal:
            return [(i, i) for i in range(self.dim)]
        return [(i, j) for i in range(self.dim) for j in range(i, self.dim)]

    @property
    def size(self) -> int:
        return self.dim + len(self._pairs())

    def _check(self, x: Operand) -> int:
        shape = ad.value_of(x).shape
        if len(shape) != 2 or shape[1] != self.dim:
            raise ConfigurationError(f"Basis on R^{self.dim} got samples of shape {shape}")
        return shape[0]

    def values(self, x: Operand) -> Operand:
        """Ψ(x) as a B×K matrix."""
        self._check(x)
        cols = [ad.getitem(x, (slice(None), slice(k, k + 1))) for k in range(self.dim)]
        columns = list(cols)
        for i, j in self._pairs():
            if i == j:
                columns.append(ad.mul(0.5, ad.square(cols[i])))
            else:
                columns.append(ad.mul(cols[i], cols[j]))
        return ad.concatenate(columns, axis=1)

    def partials(self, x: Operand) -> list[Operand]:
        """For each spatial direction l, the B×K matrix ∂_{x_l} ψ_k(x)."""
        batch = self._check(x)
        ones = np.ones((batch, 1))
        zeros = np.zeros((batch, 1))
        cols = [ad.getitem(x, (slice(None), slice(k, k + 1))) for k in range(self.dim)]
        out = []
        for l in range(self.dim):
            columns: list[Operand] = [ones if k == l else zeros for k in range(self.dim)]
            for i, j in self._pairs():
                if i == j:
                    columns.append(cols[i] if i == l else zeros)
                elif l == i:
                    columns.append(cols[j])
                elif l == j:
                    columns.append(cols[i])
                else:
                    columns.append(zeros)
            out.append(ad.concatenate(columns, axis=1))
        return out

    def gram(self, x: Operand) -> Operand:
        """M = E_b Σ_l ∂_lψ_i ∂_lψ_j, a K×K matrix."""
        batch = self._check(x)
        total: Operand = np.zeros((self.size, self.size))
        for d in self.partials(x):
            total = ad.add(total, ad.matmul(ad.transpose(d), d))
        return ad.div(total, float(batch))


# ---------------------------------------------------------------------------
# batch-level penalty kernels (operate on possibly traced B×n arrays)
# ---------------------------------------------------------------------------

def _rwp(x: Operand, y: Operand) -> Operand:
    return ad.mean(ad.sum_(ad.square(ad.sub(x, y)), axis=1))


def _o1sbe(x: Operand, y: Operand) -> Operand:
    return ad.sum_(ad.square(ad.mean(ad.sub(x, y), axis=0)))


def _o2diag(x: Operand, y: Operand, ytilde: Operand) -> Operand:
    m = ad.mean(ad.sub(x, y), axis=0)
    s = ad.mul(0.5, ad.mean(ad.sub(ad.square(x), ad.square(y)), axis=0))
    ybar = ad.mean(ytilde, axis=0)
    var = ad.mean(ad.square(ad.sub(ytilde, ybar)), axis=0)
    var_values = ad.value_of(var)
    low = np.flatnonzero(var_values < VARIANCE_FLOOR)
    if low.size:
        i = int(low[0])
        raise DegenerateCoordinateError(
            f"Coordinate {i} has sample variance {var_values[i]:.3e} below floor {VARIANCE_FLOOR}",
            coordinate=i,
        )
    centred = ad.sub(s, ad.mul(ybar, m))
    q = ad.div(centred, var)
    # a = m - ybar*q, so a·m + q·s = m² + q (s - ybar m)
    return ad.sum_(ad.add(ad.square(m), ad.mul(q, centred)))


def _damping_value(gram: Operand, damping: Optional[float]) -> float:
    if damping is not None:
        return float(damping)
    g = ad.value_of(gram)
    return AUTO_DAMPING_SCALE * float(np.trace(g)) / g.shape[0]


def _affine(basis: AffineBasis, x: Operand, y: Operand, ytilde: Operand,
            damping: Optional[float]) -> Operand:
    ell = ad.mean(ad.sub(basis.values(x), basis.values(y)), axis=0)
    gram = basis.gram(ytilde)
    lam = _damping_value(gram, damping)
    if lam > 0:
        gram = ad.add(gram, lam * np.eye(basis.size))
    return ad.matmul(ell, ad.sym_solve(gram, ell))


# ---------------------------------------------------------------------------
# ProximalPenalty
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProximalPenalty:
    """
    One member of the penalty family.

    Parameters
    ----------
    kind : PenaltyKind
    midpoint : Midpoint
        θ̃ = θ^k (previous) or (θ + θ^k)/2 (average).
    damping : float or None
        Levenberg-Marquardt shift λ added to M(θ̃) or G; None selects
        ``1e-8 · trace/K``. ``0.0`` disables the shift.
    degree, diagonal : int, bool
        Basis for ``kind=affine``.
    """

    kind: PenaltyKind = PenaltyKind.RWP
    midpoint: Midpoint = Midpoint.PREVIOUS
    damping: Optional[float] = None
    degree: int = 1
    diagonal: bool = True

    def __post_init__(self) -> None:
        try:
            object.__setattr__(self, "kind", PenaltyKind(self.kind))
            object.__setattr__(self, "midpoint", Midpoint(self.midpoint))
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from exc
        if self.damping is not None and not self.damping >= 0:
            raise ConfigurationError(f"Damping must be >= 0, got {self.damping}")
        if self.degree not in (1, 2):
            raise ConfigurationError(f"Basis degree must be 1 or 2, got {self.degree}")

    @property
    def label(self) -> str:
        if self.kind is PenaltyKind.AFFINE:
            if self.degree == 1:
                return "affine1"
            return f"affine{self.degree}{'d' if self.diagonal else 'f'}"
        return self.kind.value

    def check_model(self, gen: Generator) -> None:
        if self.kind is PenaltyKind.EXACT1D and gen.output_dim != 1:
            raise UnsupportedDimensionError(
                f"Exact1D penalty needs a 1-D model, got n={gen.output_dim}"
            )

    def distance_sq(self, x: Operand, y: Operand, ytilde: Optional[Operand] = None) -> Operand:
        """D̃² on already generated batches (x at θ, y at θ^k, ỹ at θ̃)."""
        if ytilde is None:
            ytilde = y
        if self.kind is PenaltyKind.RWP:
            return _rwp(x, y)
        if self.kind is PenaltyKind.O1SBE:
            return _o1sbe(x, y)
        if self.kind is PenaltyKind.O2DIAG:
            return _o2diag(x, y, ytilde)
        if self.kind is PenaltyKind.AFFINE:
            basis = AffineBasis(ad.value_of(x).shape[1], self.degree, self.diagonal)
            return _affine(basis, x, y, ytilde, self.damping)
        if self.kind is PenaltyKind.NONE:
            return np.zeros(())
        raise UsageError("Exact1D penalty is defined on parameters; use as_function")

    def as_function(self, gen: Generator, theta_k: Any, latents: LatentBatch) -> DiffFunction:
        """θ ↦ D̃(θ, θ^k)² on the latent batch, as a differentiable function."""
        self.check_model(gen)
        theta_k = _values(theta_k)
        z = latents.values
        if self.kind is PenaltyKind.EXACT1D:
            return self._exact1d_function(gen, theta_k, z)
        y = gen.forward(z, theta_k)

        def rule(theta: Operand, _inputs: Any) -> Operand:
            x = gen.rule(theta, z)
            ytilde: Operand = y
            if self.midpoint is Midpoint.AVERAGE and self.kind in (PenaltyKind.O2DIAG, PenaltyKind.AFFINE):
                ytilde = gen.rule(ad.mul(0.5, ad.add(theta, theta_k)), z)
            return self.distance_sq(x, y, ytilde)

        return DiffFunction(rule, param_length=gen.param_length, name=f"penalty[{self.label}]")

    def _exact1d_function(self, gen: Generator, theta_k: np.ndarray, z: np.ndarray) -> DiffFunction:
        # G(θ̃) is held constant inside one evaluation
        def metric_at(theta_tilde: np.ndarray) -> np.ndarray:
            if gen.kind == "delta_mixture":
                return np.diag([gen.alpha, 1.0 - gen.alpha])
            jac = ad.jacobian(gen.as_function(), theta_tilde, z)
            return jac.T @ jac / z.shape[0]

        fixed = metric_at(theta_k) if self.midpoint is Midpoint.PREVIOUS else None

        def rule(theta: Operand, _inputs: Any) -> Operand:
            if fixed is None:
                g = metric_at(0.5 * (ad.value_of(theta) + theta_k))
            else:
                g = fixed
            delta = ad.sub(theta, theta_k)
            return ad.matmul(delta, ad.matmul(g, delta))

        return DiffFunction(rule, param_length=gen.param_length, name="penalty[exact1d]")


def _values(theta: Any) -> np.ndarray:
    if isinstance(theta, ParamVector):
        return theta.values
    return np.asarray(theta, dtype=np.float64).reshape(-1)


# ---------------------------------------------------------------------------
# public batch operations
# ---------------------------------------------------------------------------

def _require_paired(*batches: SampleBatch) -> None:
    first = batches[0]
    for other in batches[1:]:
        if not first.is_paired_with(other):
            raise UsageError(
                "Batches are not paired: they must come from the same replayed latent batch"
            )


def rwp_penalty(g_theta: SampleBatch, g_theta_k: SampleBatch) -> float:
    """Mean squared row difference of two paired batches."""
    _require_paired(g_theta, g_theta_k)
    return float(_rwp(g_theta.values, g_theta_k.values))


def o1sbe_penalty(g_theta: SampleBatch, g_theta_k: SampleBatch) -> float:
    """Squared norm of the mean row difference of two paired batches."""
    _require_paired(g_theta, g_theta_k)
    return float(_o1sbe(g_theta.values, g_theta_k.values))


def o2diag_penalty(
    g_theta: SampleBatch,
    g_theta_k: SampleBatch,
    g_midpoint: Optional[SampleBatch] = None,
) -> float:
    """
    Diagonal order-2 penalty.

    With m = E(x − y), s = ½E(x² − y²) and ỹ the midpoint batch (default y),
    q_i = (s_i − E[ỹ_i] m_i) / Var(ỹ_i), a = m − E[ỹ] ⊙ q and the value is
    Σ_i a_i m_i + q_i s_i.

    Raises
    ------
    DegenerateCoordinateError
        If some coordinate of ỹ has variance below 1e-12.
    """
    batches = [g_theta, g_theta_k] + ([g_midpoint] if g_midpoint is not None else [])
    _require_paired(*batches)
    ytilde = g_theta_k.values if g_midpoint is None else g_midpoint.values
    return float(_o2diag(g_theta.values, g_theta_k.values, ytilde))


def affine_metric(
    basis: AffineBasis,
    g_theta: SampleBatch,
    g_theta_k: SampleBatch,
    g_midpoint: SampleBatch,
    damping: Optional[float] = None,
) -> float:
    """
    ℓᵀ (M(θ̃) + λI)⁻¹ ℓ with ℓ = E[Ψ(g(θ,Z)) − Ψ(g(θ^k,Z))].

    Raises
    ------
    RankDeficiencyError
        If M(θ̃) + λI is singular; the exception carries the null direction.
    """
    _require_paired(g_theta, g_theta_k, g_midpoint)
    return float(_affine(basis, g_theta.values, g_theta_k.values, g_midpoint.values, damping))


# ---------------------------------------------------------------------------
# metric tensors
# ---------------------------------------------------------------------------

METRIC_TAGS = ("exact-1D", "relaxed-pullback", "affine-pullback", "delta-mixture-closed-form")


@dataclass(frozen=True, eq=False)
class MetricTensor:
    """Symmetric PSD d×d matrix evaluated at ``theta``."""

    matrix: np.ndarray
    theta: np.ndarray
    tag: str

    def __post_init__(self) -> None:
        g = np.asarray(self.matrix, dtype=np.float64)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise ConfigurationError(f"Metric tensor must be square, got {g.shape}")
        if self.tag not in METRIC_TAGS:
            raise ConfigurationError(f"Unknown metric tag {self.tag!r}")
        scale = max(1.0, float(np.max(np.abs(g), initial=0.0)))
        if np.max(np.abs(g - g.T), initial=0.0) > 1e-10 * scale:
            raise NumericError("Metric tensor is not symmetric", primitive="metric")
        g = 0.5 * (g + g.T)
        if g.size and np.linalg.eigvalsh(g)[0] < -1e-8 * scale:
            raise NumericError("Metric tensor is not positive semidefinite", primitive="metric")
        g.setflags(write=False)
        object.__setattr__(self, "matrix", g)
        object.__setattr__(self, "theta", np.array(_values(self.theta)))

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[0])


def relaxed_metric_tensor(gen: Generator, theta: Any, latents: LatentBatch) -> MetricTensor:
    """E_Z[∇_θ g ∇_θ gᵀ] on the batch; half the Hessian of the RWP penalty at θ^k = θ."""
    values = _values(theta)
    jac = ad.jacobian(gen.as_function(), values, latents.values)
    g = jac.T @ jac / latents.values.shape[0]
    tag = "exact-1D" if gen.output_dim == 1 else "relaxed-pullback"
    return MetricTensor(g, values, tag)


def metric_tensor_1d(gen: Generator, theta: Any, src: Any, batch_size: int) -> MetricTensor:
    """
    Pulled-back Wasserstein metric of a 1-D model, estimated on ``batch_size`` latents.

    In one dimension the shared-latent coupling is monotone and the metric is
    exactly E_Z[∇_θ g(θ,Z) ∇_θ g(θ,Z)ᵀ].
    """
    if gen.output_dim != 1:
        raise UnsupportedDimensionError(f"metric_tensor_1d needs n = 1, got n={gen.output_dim}")
    return relaxed_metric_tensor(gen, theta, src.draw(batch_size))


def affine_metric_tensor(
    gen: Generator,
    theta: Any,
    basis: AffineBasis,
    latents: LatentBatch,
    damping: Optional[float] = None,
) -> MetricTensor:
    """
    G̃ = Jᵀ (M(θ) + λI)⁻¹ J with J = ∂_θ E Ψ(g(θ,Z)).

    G̃ is the Hessian in θ of ½·D̃² from the affine penalty at θ = θ^k.
    """
    values = _values(theta)
    z = latents.values

    def rule(t: Operand, _inputs: Any) -> Operand:
        return ad.mean(basis.values(gen.rule(t, z)), axis=0)

    expected = DiffFunction(rule, param_length=gen.param_length, output_shape=None, name="expected_basis")
    jac = ad.jacobian(expected, values)
    gram = np.asarray(basis.gram(gen.forward(z, values)))
    lam = _damping_value(gram, damping)
    solved = ad.sym_solve(gram + lam * np.eye(basis.size), jac)
    return MetricTensor(jac.T @ solved, values, "affine-pullback")


def delta_mixture_metric_tensor(model: DeltaMixtureModel) -> MetricTensor:
    """diag(α, 1 − α), constant in θ."""
    return MetricTensor(np.diag([model.alpha, 1.0 - model.alpha]), model.theta, "delta-mixture-closed-form")


# ---------------------------------------------------------------------------
# delta-mixture closed forms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DivergenceRecord:
    """Four ways of comparing two delta mixtures; kl and l2 use math.inf."""

    w2sq: float
    euclidsq: float
    kl: float
    l2: float

    def as_dict(self) -> dict[str, float]:
        return {"w2sq": self.w2sq, "euclidsq": self.euclidsq, "kl": self.kl, "l2": self.l2}


def delta_mixture_distances(m: DeltaMixtureModel, m_k: DeltaMixtureModel) -> DivergenceRecord:
    if m.alpha != m_k.alpha:
        raise UsageError(f"Models have different mixture ratios: {m.alpha} vs {m_k.alpha}")
    da = m.a - m_k.a
    db = m.b - m_k.b
    same = da == 0.0 and db == 0.0
    sentinel = 0.0 if same else math.inf
    return DivergenceRecord(
        w2sq=m.alpha * da * da + (1.0 - m.alpha) * db * db,
        euclidsq=da * da + db * db,
        kl=sentinel,
        l2=sentinel,
    )


def delta_mixture_w1_objective(target: DeltaMixtureModel) -> DiffFunction:
    """F(a, b) = W1(ρ_θ, ρ_target) = α|a − a*| + (1 − α)|b − b*| for models with a < b."""
    center = target.theta
    weights = np.array([target.alpha, 1.0 - target.alpha])

    def rule(theta: Operand, _inputs: Any) -> Operand:
        return ad.sum_(ad.mul(weights, ad.abs_(ad.sub(theta, center))))

    return DiffFunction(rule, param_length=2, name="delta_mixture_w1")


PenaltyLike = Union[ProximalPenalty, str]


def parse_penalty(spec: PenaltyLike) -> ProximalPenalty:
    """``rwp``, ``o1sbe``, ``o2diag``, ``exact1d``, ``none`` or ``affine1``/``affine2d``/``affine2f``."""
    if isinstance(spec, ProximalPenalty):
        return spec
    text = spec.strip().lower()
    if text in ("affine1", "affine2d", "affine2f"):
        return ProximalPenalty(PenaltyKind.AFFINE, degree=int(text[6]), diagonal=not text.endswith("f"))
    try:
        return ProximalPenalty(PenaltyKind(text))
    except ValueError as exc:
        raise ConfigurationError(
            f"Unknown penalty {text!r}; expected one of "
            f"{[k.value for k in PenaltyKind if k is not PenaltyKind.AFFINE]} or affine1/affine2d/affine2f"
        ) from exc
