#!/usr/bin/env python3
"""
Time Discretizations of the Wasserstein Gradient Flow
=====================================================

  forward Euler        θ^{k+1} = θ^k − h (G + λI)^† ∇F(θ^k)
  semi-backward Euler  θ^{k+1} ≈ argmin_θ F(θ) + D̃(θ, θ^k)² / (2h)
  backward Euler       the same with the exact distance (delta mixtures, 1-D models)

The inner minimization of the proximal schemes runs a fixed number ℓ of
optimizer steps from θ^k (``solve="fixed"``) or, for oracle comparisons, a
Newton-CG solve to tolerance (``solve="converge"``).

Also here: the pseudoinverse used by the explicit scheme, the exact proximal
map of a weighted ℓ1 objective, and the Lyapunov and local-convergence
diagnostics of trajectories.

Author: wprox developers
"""

import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional, Union

import numpy as np
import pandas as pd
from scipy import optimize

from wprox import autodiff as ad
from wprox.autodiff import DiffFunction, Operand, grad_scalar
from wprox.exceptions import ConfigurationError, DivergenceError, UsageError
from wprox.metric import MetricTensor, PenaltyKind, ProximalPenalty
from wprox.models import DeltaMixtureModel, Generator, LatentBatch
from wprox.params import ParamVector

logger = logging.getLogger(__name__)

TRAJECTORY_COLUMNS = ["outer_iter", "inner_iter", "F", "penalty", "step_norm", "wallclock_s"]
SOLVE_MODES = ("fixed", "converge")
SCHEMES = ("forward", "sbe", "backward")


# ---------------------------------------------------------------------------
# inner optimizer
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OptimizerState:
    step: int
    first: np.ndarray
    second: np.ndarray


@dataclass(frozen=True)
class InnerOptimizer:
    """Plain gradient descent (``sgd``) or Adam (``adam``)."""

    rule: str = "adam"
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self) -> None:
        if self.rule not in ("sgd", "adam"):
            raise ConfigurationError(f"Unknown optimizer rule {self.rule!r}; expected 'sgd' or 'adam'")
        if not self.lr > 0:
            raise ConfigurationError(f"Learning rate must be positive, got {self.lr}")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ConfigurationError(f"betas must lie in [0, 1), got {self.beta1}, {self.beta2}")
        if not self.eps > 0:
            raise ConfigurationError(f"eps must be positive, got {self.eps}")

    def init(self, size: int) -> OptimizerState:
        return OptimizerState(0, np.zeros(size), np.zeros(size))

    def update(
        self, values: np.ndarray, grad: np.ndarray, state: OptimizerState
    ) -> tuple[np.ndarray, OptimizerState]:
        if state.first.shape != values.shape or grad.shape != values.shape:
            raise ConfigurationError(
                f"Optimizer state {state.first.shape} does not match parameters {values.shape}"
            )
        if self.rule == "sgd":
            return values - self.lr * grad, OptimizerState(state.step + 1, state.first, state.second)
        step = state.step + 1
        first = self.beta1 * state.first + (1.0 - self.beta1) * grad
        second = self.beta2 * state.second + (1.0 - self.beta2) * grad * grad
        m_hat = first / (1.0 - self.beta1**step)
        v_hat = second / (1.0 - self.beta2**step)
        new = values - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
        return new, OptimizerState(step, first, second)


@dataclass(frozen=True)
class FlowConfig:
    """
    Parameters
    ----------
    h : float
        Proximal step size; ``inf`` switches the penalty off.
    inner_iterations : int
        ℓ optimizer steps per proximal step in ``fixed`` mode.
    penalty : ProximalPenalty
        Penalty kind, midpoint rule and damping λ.
    max_outer : int
        Default number of outer steps for :func:`flow_integrate`.
    solve : str
        ``fixed`` or ``converge``.
    divergence_factor : float
        An objective above ``factor * max(|start|, 1)`` aborts the solve.
    tolerance : float
        Newton-CG tolerance in ``converge`` mode.
    """

    h: float = 0.1
    inner_iterations: int = 5
    penalty: ProximalPenalty = field(default_factory=ProximalPenalty)
    max_outer: int = 100
    solve: str = "fixed"
    divergence_factor: float = 10.0
    tolerance: float = 1e-12

    def __post_init__(self) -> None:
        if not self.h > 0:
            raise ConfigurationError(f"Step size h must be positive, got {self.h}")
        if self.inner_iterations < 1:
            raise ConfigurationError(f"inner_iterations must be >= 1, got {self.inner_iterations}")
        if self.max_outer < 0:
            raise ConfigurationError(f"max_outer must be >= 0, got {self.max_outer}")
        if self.solve not in SOLVE_MODES:
            raise ConfigurationError(f"Unknown solve mode {self.solve!r}; expected one of {SOLVE_MODES}")
        if not self.divergence_factor > 1:
            raise ConfigurationError(f"divergence_factor must exceed 1, got {self.divergence_factor}")

    @property
    def midpoint(self) -> Any:
        return self.penalty.midpoint

    @property
    def damping(self) -> Optional[float]:
        return self.penalty.damping

    @property
    def penalty_active(self) -> bool:
        return math.isfinite(self.h) and self.penalty.kind is not PenaltyKind.NONE


# ---------------------------------------------------------------------------
# explicit scheme
# ---------------------------------------------------------------------------

def pseudo_inverse(matrix: Any, rel_cutoff: float = 1e-10) -> np.ndarray:
    """Moore-Penrose inverse of a symmetric PSD matrix; eigenvalues below ``rel_cutoff·λ_max`` are dropped."""
    g = np.asarray(matrix, dtype=np.float64)
    w, u = np.linalg.eigh(0.5 * (g + g.T))
    top = float(w.max(initial=0.0))
    if top <= 0:
        return np.zeros_like(g)
    keep = w > rel_cutoff * top
    return (u[:, keep] / w[keep]) @ u[:, keep].T


def _values(theta: Any) -> np.ndarray:
    if isinstance(theta, ParamVector):
        return theta.values
    return np.asarray(theta, dtype=np.float64).reshape(-1)


def _like(theta: Any, values: np.ndarray) -> ParamVector:
    if isinstance(theta, ParamVector):
        return theta.with_values(values)
    return ParamVector.flat(values)


def _matrix(g: Union[MetricTensor, np.ndarray]) -> np.ndarray:
    return g.matrix if isinstance(g, MetricTensor) else np.asarray(g, dtype=np.float64)


def forward_euler_step(
    objective: DiffFunction,
    theta_k: Any,
    metric: Union[MetricTensor, np.ndarray],
    h: float,
    damping: float = 0.0,
) -> ParamVector:
    """θ^k − h (G + λI)^† ∇F(θ^k)."""
    if not h > 0:
        raise ConfigurationError(f"Step size h must be positive, got {h}")
    if damping < 0:
        raise ConfigurationError(f"Damping must be >= 0, got {damping}")
    values = _values(theta_k)
    g = _matrix(metric)
    if g.shape != (values.size, values.size):
        raise ConfigurationError(f"Metric is {g.shape}, parameters have length {values.size}")
    _, grad = grad_scalar(objective, values)
    direction = pseudo_inverse(g + damping * np.eye(values.size)) @ grad
    return _like(theta_k, values - h * direction)


# ---------------------------------------------------------------------------
# proximal schemes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InnerRecord:
    inner_iter: int
    objective: float
    penalty: float


def quadratic_penalty_function(metric: Any, theta_k: Any) -> DiffFunction:
    """θ ↦ (θ − θ^k)ᵀ G (θ − θ^k) for a constant G."""
    g = _matrix(metric)
    center = _values(theta_k)

    def rule(theta: Operand, _inputs: Any) -> Operand:
        delta = ad.sub(theta, center)
        return ad.matmul(delta, ad.matmul(g, delta))

    return DiffFunction(rule, param_length=center.size, name="penalty[quadratic]")


def penalized(objective: DiffFunction, penalty_fn: Optional[DiffFunction], weight: float) -> DiffFunction:
    """θ ↦ F(θ) + weight · penalty(θ)."""
    if penalty_fn is None:
        return objective

    def rule(theta: Operand, _inputs: Any) -> Operand:
        return ad.add(objective.rule(theta, None), ad.mul(weight, penalty_fn.rule(theta, None)))

    return DiffFunction(rule, param_length=objective.param_length, name=f"{objective.name}+prox")


def _guard(value: float, start: float, factor: float, history: list[float]) -> None:
    if value > factor * max(abs(start), 1.0):
        raise DivergenceError(
            f"Objective {value:.6g} exceeded {factor:g}x its starting value {start:.6g}",
            trace=history,
        )


def _solve_fixed(
    total: DiffFunction,
    start: np.ndarray,
    cfg: FlowConfig,
    inner: InnerOptimizer,
    penalty_fn: Optional[DiffFunction],
    records: Optional[list[InnerRecord]],
) -> np.ndarray:
    values = start.copy()
    state = inner.init(values.size)
    history: list[float] = []
    first = None
    for i in range(cfg.inner_iterations):
        value, grad = grad_scalar(total, values)
        first = value if first is None else first
        history.append(value)
        _guard(value, first, cfg.divergence_factor, history)
        if records is not None:
            pen = float(penalty_fn(values)) if penalty_fn is not None else 0.0
            records.append(InnerRecord(i, value, pen))
        values, state = inner.update(values, grad, state)
    final = float(total(values))
    history.append(final)
    _guard(final, first, cfg.divergence_factor, history)
    return values


def _solve_converge(
    total: DiffFunction,
    start: np.ndarray,
    cfg: FlowConfig,
    penalty_fn: Optional[DiffFunction],
    records: Optional[list[InnerRecord]],
) -> np.ndarray:
    eps = 1e-6

    def fun(v: np.ndarray) -> tuple[float, np.ndarray]:
        return grad_scalar(total, v)

    def hessp(v: np.ndarray, p: np.ndarray) -> np.ndarray:
        scale = eps / max(float(np.linalg.norm(p)), 1e-300)
        _, gp = grad_scalar(total, v + scale * p)
        _, gm = grad_scalar(total, v - scale * p)
        return (gp - gm) / (2.0 * scale)

    start_value = float(total(start))
    res = optimize.minimize(
        fun, start, jac=True, hessp=hessp, method="Newton-CG",
        options={"xtol": cfg.tolerance, "maxiter": 200},
    )
    if not res.success:
        logger.warning("Newton-CG inner solve did not converge: %s", res.message)
    logger.debug("Newton-CG: %d iterations, objective %.6g", res.nit, res.fun)
    _guard(float(res.fun), start_value, cfg.divergence_factor, [start_value, float(res.fun)])
    if records is not None:
        pen = float(penalty_fn(res.x)) if penalty_fn is not None else 0.0
        records.append(InnerRecord(int(res.nit), float(res.fun), pen))
    return np.asarray(res.x, dtype=np.float64)


def proximal_solve(
    objective: DiffFunction,
    theta_k: Any,
    penalty_fn: Optional[DiffFunction],
    cfg: FlowConfig,
    inner: InnerOptimizer,
    records: Optional[list[InnerRecord]] = None,
) -> ParamVector:
    """Minimize F + penalty_fn / (2h) from θ^k with the configured inner solver."""
    start = _values(theta_k)
    if objective.param_length != start.size:
        raise ConfigurationError(
            f"Objective takes {objective.param_length} parameters, θ^k has {start.size}"
        )
    if not cfg.penalty_active:
        penalty_fn = None
    total = penalized(objective, penalty_fn, 1.0 / (2.0 * cfg.h))
    if cfg.solve == "converge":
        values = _solve_converge(total, start, cfg, penalty_fn, records)
    else:
        values = _solve_fixed(total, start, cfg, inner, penalty_fn, records)
    return _like(theta_k, values)


def sbe_step(
    objective: DiffFunction,
    theta_k: Any,
    penalty: ProximalPenalty,
    cfg: FlowConfig,
    inner: InnerOptimizer,
    *,
    model: Generator,
    latents: LatentBatch,
    records: Optional[list[InnerRecord]] = None,
) -> ParamVector:
    """
    One semi-backward Euler step.

    The penalty D̃(θ, θ^k)² is evaluated on ``latents`` pushed through ``model``
    at θ and at the fixed θ^k; under the average midpoint rule θ̃ follows θ
    through every inner iteration.
    """
    penalty.check_model(model)
    penalty_fn = penalty.as_function(model, theta_k, latents) if cfg.penalty_active else None
    return proximal_solve(objective, theta_k, penalty_fn, cfg, inner, records)


def backward_euler_step(
    objective: DiffFunction,
    theta_k: Any,
    penalty: ProximalPenalty,
    cfg: FlowConfig,
    inner: InnerOptimizer,
    *,
    model: Union[DeltaMixtureModel, Generator],
    latents: Optional[LatentBatch] = None,
    records: Optional[list[InnerRecord]] = None,
) -> ParamVector:
    """
    One proximal step with the exact distance.

    Supported models are the delta mixture (constant metric diag(α, 1 − α)) and
    1-D generators (Exact1D metric on ``latents``), the two families on which
    the squared distance is available exactly.
    """
    if isinstance(model, DeltaMixtureModel):
        metric = np.diag([model.alpha, 1.0 - model.alpha])
        penalty_fn = quadratic_penalty_function(metric, theta_k) if cfg.penalty_active else None
        return proximal_solve(objective, theta_k, penalty_fn, cfg, inner, records)
    if isinstance(model, Generator) and model.output_dim == 1:
        if latents is None:
            raise UsageError("backward_euler_step on a generator needs a latent batch")
        exact = ProximalPenalty(PenaltyKind.EXACT1D, penalty.midpoint, penalty.damping)
        return sbe_step(objective, theta_k, exact, cfg, inner, model=model, latents=latents, records=records)
    raise UsageError(
        f"backward_euler_step supports delta mixtures and 1-D generators, got {type(model).__name__}"
    )


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------

@dataclass
class Trajectory:
    """Iterates of a flow with one log row per outer step (row 0 is θ₀)."""

    thetas: list[np.ndarray] = field(default_factory=list)
    rows: list[dict[str, float]] = field(default_factory=list)

    @property
    def objective_values(self) -> np.ndarray:
        return np.array([r["F"] for r in self.rows])

    def lyapunov_violations(self, tolerance: float = 1e-10) -> int:
        """Number of steps where F increased by more than ``tolerance``."""
        f = self.objective_values
        return int(np.sum(np.diff(f) > tolerance))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=TRAJECTORY_COLUMNS)

    def to_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        self.to_frame().to_csv(path, index=False)
        logger.info("Wrote trajectory (%d rows) to %s", len(self.rows), path)
        return path


def flow_integrate(
    objective: DiffFunction,
    theta0: Any,
    cfg: FlowConfig,
    inner: Optional[InnerOptimizer] = None,
    *,
    steps: Optional[int] = None,
    scheme: str = "sbe",
    model: Optional[Union[Generator, DeltaMixtureModel]] = None,
    latents: Optional[LatentBatch] = None,
    metric: Optional[Union[MetricTensor, np.ndarray, Callable[[np.ndarray], Any]]] = None,
) -> Trajectory:
    """
    Run ``steps`` outer steps of ``scheme`` from θ₀.

    ``metric`` is required for the forward scheme: a fixed matrix or a callable
    returning the metric at the current iterate. The penalty column holds the
    distance surrogate between consecutive iterates.
    """
    if scheme not in SCHEMES:
        raise ConfigurationError(f"Unknown scheme {scheme!r}; expected one of {SCHEMES}")
    steps = cfg.max_outer if steps is None else steps
    if steps < 0:
        raise ConfigurationError(f"steps must be >= 0, got {steps}")
    if scheme == "forward" and metric is None:
        raise ConfigurationError("Forward Euler needs a metric")
    if scheme == "sbe" and (not isinstance(model, Generator) or latents is None):
        raise ConfigurationError("Semi-backward Euler needs a generator and a latent batch")
    inner = inner or InnerOptimizer()

    started = time.monotonic()
    theta = _values(theta0).copy()
    f0 = float(objective(theta))
    traj = Trajectory([theta.copy()], [_row(0, 0, f0, 0.0, 0.0, started)])
    history = [f0]

    for k in range(1, steps + 1):
        records: list[InnerRecord] = []
        if scheme == "forward":
            g = _matrix(metric(theta) if callable(metric) else metric)
            new = forward_euler_step(objective, theta, g, cfg.h, cfg.damping or 0.0).values
            delta = new - theta
            pen = float(delta @ g @ delta)
            inner_count = 0
        else:
            if scheme == "sbe":
                new = sbe_step(objective, theta, cfg.penalty, cfg, inner, model=model,
                               latents=latents, records=records).values
                used = cfg.penalty
            else:
                new = backward_euler_step(objective, theta, cfg.penalty, cfg, inner, model=model,
                                          latents=latents, records=records).values
                used = ProximalPenalty(PenaltyKind.EXACT1D, cfg.penalty.midpoint, cfg.penalty.damping)
            pen = _distance_to_previous(used, model, theta, new, latents)
            if cfg.solve == "fixed":
                inner_count = cfg.inner_iterations
            else:
                inner_count = records[-1].inner_iter if records else 0
        value = float(objective(new))
        history.append(value)
        _guard(value, f0, cfg.divergence_factor, history)
        traj.thetas.append(new.copy())
        traj.rows.append(_row(k, inner_count, value, pen, float(np.linalg.norm(new - theta)), started))
        theta = new
        logger.debug("flow step %d: F=%.6g step=%.3e", k, value, traj.rows[-1]["step_norm"])

    logger.info("Flow (%s, %d steps) finished at F=%.6g", scheme, steps, traj.rows[-1]["F"])
    return traj


def _row(k: int, inner: int, f: float, pen: float, step: float, started: float) -> dict[str, float]:
    return {
        "outer_iter": k,
        "inner_iter": inner,
        "F": f,
        "penalty": pen,
        "step_norm": step,
        "wallclock_s": round(time.monotonic() - started, 3),
    }


def _distance_to_previous(
    penalty: ProximalPenalty, model: Any, previous: np.ndarray, new: np.ndarray,
    latents: Optional[LatentBatch],
) -> float:
    if isinstance(model, DeltaMixtureModel):
        delta = new - previous
        return float(model.alpha * delta[0] ** 2 + (1.0 - model.alpha) * delta[1] ** 2)
    if penalty.kind is PenaltyKind.NONE:
        return 0.0
    return float(penalty.as_function(model, previous, latents)(new))


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

def numerical_hessian(objective: DiffFunction, theta: Any, step: float = 1e-5) -> np.ndarray:
    """Central differences of exact gradients, symmetrized."""
    values = _values(theta)
    d = values.size
    hess = np.zeros((d, d))
    for j in range(d):
        shift = np.zeros(d)
        shift[j] = step
        _, gp = grad_scalar(objective, values + shift)
        _, gm = grad_scalar(objective, values - shift)
        hess[:, j] = (gp - gm) / (2.0 * step)
    return 0.5 * (hess + hess.T)


def local_convergence_rate(objective: DiffFunction, theta_star: Any, metric: Any) -> float:
    """
    λ_min of G^† · Hess F at a critical point.

    A positive value means the flow contracts locally around ``theta_star``.
    """
    hess = numerical_hessian(objective, theta_star)
    eig = np.linalg.eigvals(pseudo_inverse(_matrix(metric)) @ hess)
    return float(np.min(eig.real))


def bisect_step_size(
    violations: Callable[[float], int],
    h_low: float,
    h_high: float,
    iterations: int = 30,
) -> float:
    """
    Largest h in [h_low, h_high] (to bisection resolution) with no Lyapunov violations.

    ``violations(h)`` returns the number of F increases of a run at step size h;
    a run that raises :class:`DivergenceError` counts as violating.
    """
    if not 0 < h_low < h_high:
        raise ConfigurationError(f"Need 0 < h_low < h_high, got {h_low}, {h_high}")

    def ok(h: float) -> bool:
        try:
            return violations(h) == 0
        except DivergenceError:
            return False

    if not ok(h_low):
        raise ConfigurationError(f"Lower bound h={h_low} already violates monotone descent")
    if ok(h_high):
        return h_high
    lo, hi = h_low, h_high
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    logger.info("Bisected step size h0=%.6g", lo)
    return lo


def proximal_weighted_l1(
    anchor: Any, center: Any, l1_weights: Any, metric_diag: Any, h: float
) -> np.ndarray:
    """
    argmin_θ Σ c_i |θ_i − center_i| + (1/2h) Σ w_i (θ_i − anchor_i)².

    Coordinate-wise soft thresholding with threshold h c_i / w_i.
    """
    anchor = np.asarray(anchor, dtype=np.float64)
    center = np.asarray(center, dtype=np.float64)
    c = np.asarray(l1_weights, dtype=np.float64)
    w = np.asarray(metric_diag, dtype=np.float64)
    if not h > 0:
        raise ConfigurationError(f"Step size h must be positive, got {h}")
    if np.any(w <= 0) or np.any(c < 0):
        raise ConfigurationError("Metric weights must be positive and l1 weights nonnegative")
    offset = anchor - center
    shrink = np.maximum(np.abs(offset) - h * c / w, 0.0)
    return center + np.sign(offset) * shrink
