#!/usr/bin/env python3
"""
Reverse-Mode Differentiation Engine
===================================

Exact gradients of scalar objectives with respect to flat parameter vectors.

Every evaluation that needs derivatives owns a private :class:`Trace`. The
parameter vector enters the trace as a leaf :class:`Tensor`; every primitive
applied to a tensor appends one node holding its value, its parents and its
vector-Jacobian product. :meth:`Trace.backward` walks the nodes in reverse
creation order and accumulates adjoints.

Primitives accept plain arrays as well. When none of the operands is a tensor
the primitive returns a plain ``np.ndarray``, so model and penalty code is
written once and runs either as plain numpy evaluation or traced.

Kinked primitives (``relu``, ``leaky_relu``, ``abs``, ``clip``, ``sort``) use
the subgradient 0 at the kink and record their activation pattern on the
trace; :func:`finite_diff_check` compares these patterns to flag coordinates
whose finite-difference stencil crosses a kink.

All arithmetic is float64.

Author: wprox developers
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence, Union

import numpy as np

from wprox.exceptions import ConfigurationError, NumericError, RankDeficiencyError
from wprox.params import ParamSlice, ParamVector

logger = logging.getLogger(__name__)

Operand = Union["Tensor", np.ndarray, float, int]
VJP = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


# ---------------------------------------------------------------------------
# Trace and Tensor
# ---------------------------------------------------------------------------

class Trace:
    """Ordered record of primitive applications for one evaluation."""

    def __init__(self) -> None:
        self.nodes: list[Tensor] = []
        self.kinks: list[tuple[str, bytes]] = []

    def leaf(self, value: Any, name: str = "leaf") -> "Tensor":
        return self.record(name, np.array(value, dtype=np.float64), (), None)

    def record(
        self,
        op: str,
        value: np.ndarray,
        parents: tuple[Any, ...],
        vjp: Optional[VJP],
    ) -> "Tensor":
        node = Tensor(value, self, len(self.nodes), op, parents, vjp)
        self.nodes.append(node)
        return node

    def mark_kink(self, op: str, pattern: np.ndarray) -> None:
        self.kinks.append((op, np.ascontiguousarray(pattern).tobytes()))

    def backward(
        self, output: "Tensor", seed: Optional[np.ndarray] = None
    ) -> list[Optional[np.ndarray]]:
        """Adjoints of every node up to ``output``, indexed by node position."""
        if output.trace is not self:
            raise ConfigurationError("Output tensor belongs to a different trace")
        grads: list[Optional[np.ndarray]] = [None] * (output.index + 1)
        if seed is None:
            grads[output.index] = np.ones_like(output.value)
        else:
            grads[output.index] = np.asarray(seed, dtype=np.float64).reshape(output.value.shape)

        for node in reversed(self.nodes[: output.index + 1]):
            g = grads[node.index]
            if g is None or node.vjp is None:
                continue
            for parent, pg in zip(node.parents, node.vjp(g)):
                if isinstance(parent, Tensor) and pg is not None:
                    prev = grads[parent.index]
                    grads[parent.index] = pg if prev is None else prev + pg
        return grads


class Tensor:
    """A traced value. Immutable once recorded."""

    __array_ufunc__ = None  # make numpy defer to the reflected operators below
    __slots__ = ("value", "trace", "index", "op", "parents", "vjp")

    def __init__(
        self,
        value: np.ndarray,
        trace: Trace,
        index: int,
        op: str,
        parents: tuple[Any, ...],
        vjp: Optional[VJP],
    ):
        self.value = value
        self.trace = trace
        self.index = index
        self.op = op
        self.parents = parents
        self.vjp = vjp

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    @property
    def size(self) -> int:
        return int(self.value.size)

    @property
    def T(self) -> Operand:
        return transpose(self)

    def __repr__(self) -> str:
        return f"Tensor(op={self.op!r}, shape={self.shape})"

    def __add__(self, other: Operand) -> Operand:
        return add(self, other)

    def __radd__(self, other: Operand) -> Operand:
        return add(other, self)

    def __sub__(self, other: Operand) -> Operand:
        return sub(self, other)

    def __rsub__(self, other: Operand) -> Operand:
        return sub(other, self)

    def __mul__(self, other: Operand) -> Operand:
        return mul(self, other)

    def __rmul__(self, other: Operand) -> Operand:
        return mul(other, self)

    def __truediv__(self, other: Operand) -> Operand:
        return div(self, other)

    def __rtruediv__(self, other: Operand) -> Operand:
        return div(other, self)

    def __neg__(self) -> Operand:
        return neg(self)

    def __pow__(self, exponent: float) -> Operand:
        return power(self, exponent)

    def __matmul__(self, other: Operand) -> Operand:
        return matmul(self, other)

    def __rmatmul__(self, other: Operand) -> Operand:
        return matmul(other, self)

    def __getitem__(self, index: Any) -> Operand:
        return getitem(self, index)

    def reshape(self, *shape: Any) -> Operand:
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def sum(self, axis: Any = None, keepdims: bool = False) -> Operand:
        return sum_(self, axis=axis, keepdims=keepdims)

    def mean(self, axis: Any = None, keepdims: bool = False) -> Operand:
        return mean(self, axis=axis, keepdims=keepdims)


# ---------------------------------------------------------------------------
# plumbing
# ---------------------------------------------------------------------------

def is_tensor(x: Any) -> bool:
    return isinstance(x, Tensor)


def value_of(x: Operand) -> np.ndarray:
    """Underlying array of a tensor or array-like."""
    if isinstance(x, Tensor):
        return x.value
    return np.asarray(x, dtype=np.float64)


def _trace_of(operands: Sequence[Any]) -> Optional[Trace]:
    trace = None
    for a in operands:
        if isinstance(a, Tensor):
            if trace is None:
                trace = a.trace
            elif a.trace is not trace:
                raise ConfigurationError("Operands belong to different traces")
    return trace


def _checked(op: str, value: Any) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"Non-finite value produced by primitive {op!r}", primitive=op)
    return arr


def _emit(op: str, value: Any, parents: Sequence[Any], vjp: VJP) -> Operand:
    arr = _checked(op, value)
    trace = _trace_of(parents)
    if trace is None:
        return arr
    return trace.record(op, arr, tuple(parents), vjp)


def _kink(op: str, x: Operand, pattern: np.ndarray) -> None:
    if isinstance(x, Tensor):
        x.trace.mark_kink(op, pattern)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` over the axes that broadcasting added to ``shape``."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


def _axes(axis: Any, ndim: int) -> tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


# ---------------------------------------------------------------------------
# elementwise arithmetic
# ---------------------------------------------------------------------------

def add(a: Operand, b: Operand) -> Operand:
    va, vb = value_of(a), value_of(b)
    return _emit(
        "add",
        va + vb,
        (a, b),
        lambda g: (_unbroadcast(g, va.shape), _unbroadcast(g, vb.shape)),
    )


def sub(a: Operand, b: Operand) -> Operand:
    va, vb = value_of(a), value_of(b)
    return _emit(
        "sub",
        va - vb,
        (a, b),
        lambda g: (_unbroadcast(g, va.shape), _unbroadcast(-g, vb.shape)),
    )


def mul(a: Operand, b: Operand) -> Operand:
    va, vb = value_of(a), value_of(b)
    return _emit(
        "mul",
        va * vb,
        (a, b),
        lambda g: (_unbroadcast(g * vb, va.shape), _unbroadcast(g * va, vb.shape)),
    )


def div(a: Operand, b: Operand) -> Operand:
    va, vb = value_of(a), value_of(b)
    return _emit(
        "div",
        va / vb,
        (a, b),
        lambda g: (
            _unbroadcast(g / vb, va.shape),
            _unbroadcast(-g * va / (vb * vb), vb.shape),
        ),
    )


def neg(x: Operand) -> Operand:
    return _emit("neg", -value_of(x), (x,), lambda g: (-g,))


def power(x: Operand, exponent: float) -> Operand:
    """``x ** exponent`` for a constant exponent."""
    vx = value_of(x)
    p = float(exponent)
    return _emit("power", vx**p, (x,), lambda g: (g * p * vx ** (p - 1.0),))


def square(x: Operand) -> Operand:
    vx = value_of(x)
    return _emit("square", vx * vx, (x,), lambda g: (2.0 * g * vx,))


def sqrt(x: Operand) -> Operand:
    out = np.sqrt(value_of(x))
    return _emit("sqrt", out, (x,), lambda g: (g / (2.0 * out),))


def exp(x: Operand) -> Operand:
    out = np.exp(value_of(x))
    return _emit("exp", out, (x,), lambda g: (g * out,))


def log(x: Operand) -> Operand:
    vx = value_of(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(vx)
    return _emit("log", out, (x,), lambda g: (g / vx,))


def tanh(x: Operand) -> Operand:
    out = np.tanh(value_of(x))
    return _emit("tanh", out, (x,), lambda g: (g * (1.0 - out * out),))


def sigmoid(x: Operand) -> Operand:
    out = 0.5 * (1.0 + np.tanh(0.5 * value_of(x)))
    return _emit("sigmoid", out, (x,), lambda g: (g * out * (1.0 - out),))


def relu(x: Operand) -> Operand:
    """Kink at 0, subgradient 0 there."""
    vx = value_of(x)
    _kink("relu", x, np.sign(vx))
    active = (vx > 0).astype(np.float64)
    return _emit("relu", vx * active, (x,), lambda g: (g * active,))


def leaky_relu(x: Operand, slope: float = 0.2) -> Operand:
    """Kink at 0, subgradient ``slope`` there."""
    vx = value_of(x)
    _kink("leaky_relu", x, np.sign(vx))
    scale = np.where(vx > 0, 1.0, slope)
    return _emit("leaky_relu", vx * scale, (x,), lambda g: (g * scale,))


def abs_(x: Operand) -> Operand:
    """Kink at 0, subgradient 0 there."""
    vx = value_of(x)
    s = np.sign(vx)
    _kink("abs", x, s)
    return _emit("abs", np.abs(vx), (x,), lambda g: (g * s,))


def clip(x: Operand, lo: float, hi: float) -> Operand:
    """Kinks at both bounds; gradient 0 on and beyond them."""
    vx = value_of(x)
    _kink("clip", x, np.concatenate([np.sign(vx - lo).ravel(), np.sign(hi - vx).ravel()]))
    inside = ((vx > lo) & (vx < hi)).astype(np.float64)
    return _emit("clip", np.clip(vx, lo, hi), (x,), lambda g: (g * inside,))


# ---------------------------------------------------------------------------
# reductions and shape
# ---------------------------------------------------------------------------

def sum_(x: Operand, axis: Any = None, keepdims: bool = False) -> Operand:
    vx = value_of(x)
    axes = _axes(axis, vx.ndim)

    def vjp(g: np.ndarray) -> tuple[np.ndarray]:
        if not keepdims:
            g = np.expand_dims(g, axes) if axes else g
        return (np.broadcast_to(g, vx.shape).copy(),)

    return _emit("sum", np.sum(vx, axis=axes, keepdims=keepdims), (x,), vjp)


def mean(x: Operand, axis: Any = None, keepdims: bool = False) -> Operand:
    vx = value_of(x)
    axes = _axes(axis, vx.ndim)
    count = float(np.prod([vx.shape[a] for a in axes])) if axes else 1.0

    def vjp(g: np.ndarray) -> tuple[np.ndarray]:
        if not keepdims:
            g = np.expand_dims(g, axes) if axes else g
        return (np.broadcast_to(g / count, vx.shape).copy(),)

    return _emit("mean", np.mean(vx, axis=axes, keepdims=keepdims), (x,), vjp)


def reshape(x: Operand, shape: tuple[int, ...]) -> Operand:
    vx = value_of(x)
    return _emit("reshape", vx.reshape(shape), (x,), lambda g: (g.reshape(vx.shape),))


def transpose(x: Operand, axes: Optional[tuple[int, ...]] = None) -> Operand:
    vx = value_of(x)
    inverse = None if axes is None else tuple(np.argsort(axes))
    return _emit(
        "transpose", np.transpose(vx, axes), (x,), lambda g: (np.transpose(g, inverse),)
    )


def getitem(x: Operand, index: Any) -> Operand:
    vx = value_of(x)

    def vjp(g: np.ndarray) -> tuple[np.ndarray]:
        out = np.zeros_like(vx)
        np.add.at(out, index, g)
        return (out,)

    return _emit("getitem", np.array(vx[index]), (x,), vjp)


def concatenate(xs: Sequence[Operand], axis: int = 0) -> Operand:
    values = [value_of(x) for x in xs]
    splits = np.cumsum([v.shape[axis] for v in values])[:-1]
    return _emit(
        "concatenate",
        np.concatenate(values, axis=axis),
        tuple(xs),
        lambda g: tuple(np.split(g, splits, axis=axis)),
    )


def stack(xs: Sequence[Operand], axis: int = 0) -> Operand:
    values = [value_of(x) for x in xs]
    return _emit(
        "stack",
        np.stack(values, axis=axis),
        tuple(xs),
        lambda g: tuple(np.take(g, i, axis=axis) for i in range(len(values))),
    )


def sort(x: Operand, axis: int = 0) -> Operand:
    """Sort along ``axis``; the permutation is treated as locally constant."""
    vx = value_of(x)
    order = np.argsort(vx, axis=axis, kind="stable")
    _kink("sort", x, order)

    def vjp(g: np.ndarray) -> tuple[np.ndarray]:
        out = np.zeros_like(vx)
        np.put_along_axis(out, order, g, axis=axis)
        return (out,)

    return _emit("sort", np.take_along_axis(vx, order, axis=axis), (x,), vjp)


# ---------------------------------------------------------------------------
# linear algebra
# ---------------------------------------------------------------------------

def matmul(a: Operand, b: Operand) -> Operand:
    va, vb = value_of(a), value_of(b)
    if va.ndim > 2 or vb.ndim > 2:
        raise ConfigurationError("matmul supports operands of at most two dimensions")

    def vjp(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if va.ndim == 2 and vb.ndim == 2:
            return g @ vb.T, va.T @ g
        if va.ndim == 2:
            return np.outer(g, vb), va.T @ g
        if vb.ndim == 2:
            return vb @ g, np.outer(va, g)
        return g * vb, g * va

    return _emit("matmul", va @ vb, (a, b), vjp)


def sym_solve(a: Operand, b: Operand, rel_cutoff: float = 1e-12) -> Operand:
    """
    Solve ``A x = b`` for symmetric positive definite ``A``.

    The inverse is applied through a symmetric eigendecomposition. Eigenvalues at
    or below ``rel_cutoff * max eigenvalue`` raise
    :class:`~wprox.exceptions.RankDeficiencyError` carrying the null direction.
    """
    va, vb = value_of(a), value_of(b)
    sym = 0.5 * (va + va.T)
    w, u = np.linalg.eigh(sym)
    top = max(float(np.max(np.abs(w))), np.finfo(float).tiny)
    if w[0] <= rel_cutoff * top:
        raise RankDeficiencyError(
            f"Matrix is singular to working precision (smallest eigenvalue {w[0]:.3e})",
            null_direction=u[:, 0].copy(),
        )

    def apply_inverse(rhs: np.ndarray) -> np.ndarray:
        coef = u.T @ rhs
        coef = coef / (w if rhs.ndim == 1 else w[:, None])
        return u @ coef

    x = apply_inverse(vb)

    def vjp(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        gb = apply_inverse(g)
        ga = -np.outer(gb, x) if x.ndim == 1 else -(gb @ x.T)
        return ga, gb

    return _emit("sym_solve", x, (a, b), vjp)


# ---------------------------------------------------------------------------
# parameter unpacking
# ---------------------------------------------------------------------------

def split_params(theta: Operand, layout: Sequence[ParamSlice]) -> dict[str, Operand]:
    """Named, shaped blocks of a flat (possibly traced) parameter vector."""
    blocks: dict[str, Operand] = {}
    for s in layout:
        flat = getitem(theta, slice(s.offset, s.offset + s.length))
        blocks[s.name] = reshape(flat, s.block_shape)
    return blocks


# ---------------------------------------------------------------------------
# DiffFunction and the public operations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DiffFunction:
    """
    A deterministic map ``(theta, inputs) -> output`` built from primitives.

    ``rule`` receives either a plain array or a traced tensor for ``theta`` and
    must only use the primitives of this module (or numpy on values that do not
    depend on ``theta``).
    """

    rule: Callable[[Operand, Any], Operand]
    param_length: int
    input_shape: Optional[tuple[int, ...]] = None
    output_shape: Optional[tuple[int, ...]] = ()
    name: str = "f"

    def __call__(self, theta: Any, inputs: Any = None) -> np.ndarray:
        values = _theta_values(self, theta)
        _check_inputs(self, inputs)
        out = _checked(self.name, value_of(self.rule(values, inputs)))
        _check_output(self, out)
        return out

    def bind(self, inputs: Any) -> "DiffFunction":
        """Fix the inputs, leaving a function of ``theta`` alone."""
        _check_inputs(self, inputs)
        rule = self.rule
        return DiffFunction(
            rule=lambda theta, _unused: rule(theta, inputs),
            param_length=self.param_length,
            input_shape=None,
            output_shape=self.output_shape,
            name=self.name,
        )


def _theta_values(f: DiffFunction, theta: Any) -> np.ndarray:
    values = theta.values if isinstance(theta, ParamVector) else np.asarray(theta, dtype=float)
    values = values.reshape(-1)
    if values.size != f.param_length:
        raise ConfigurationError(
            f"{f.name}: expected {f.param_length} parameters, got {values.size}"
        )
    return values


def _check_inputs(f: DiffFunction, inputs: Any) -> None:
    if f.input_shape is None or inputs is None:
        return
    shape = np.shape(inputs)
    expected = f.input_shape
    if len(shape) != len(expected) or any(
        e not in (-1, s) for e, s in zip(expected, shape)
    ):
        raise ConfigurationError(f"{f.name}: input shape {shape} does not match {expected}")


def _check_output(f: DiffFunction, out: np.ndarray) -> None:
    if f.output_shape is None:
        return
    expected = int(np.prod(f.output_shape)) if f.output_shape else 1
    if -1 not in f.output_shape and out.size != expected:
        raise ConfigurationError(
            f"{f.name}: output has {out.size} entries, declared shape {f.output_shape}"
        )


def _traced(f: DiffFunction, values: np.ndarray, inputs: Any) -> tuple[Trace, Tensor, Operand]:
    trace = Trace()
    leaf = trace.leaf(values, name="theta")
    return trace, leaf, f.rule(leaf, inputs)


def grad_scalar(
    f: DiffFunction, theta: Any, inputs: Any = None
) -> tuple[float, np.ndarray]:
    """
    Value and gradient of a scalar DiffFunction.

    Parameters
    ----------
    f : DiffFunction
        Must produce a single value.
    theta : ParamVector or array-like
        Point of evaluation; length must match ``f.param_length``.
    inputs : any
        Passed through to ``f.rule``.

    Returns
    -------
    (value, gradient)
    """
    values = _theta_values(f, theta)
    _check_inputs(f, inputs)
    trace, leaf, out = _traced(f, values, inputs)
    out_value = value_of(out)
    if out_value.size != 1:
        raise ConfigurationError(f"{f.name}: grad_scalar needs a scalar output, got {out_value.shape}")
    if not isinstance(out, Tensor):
        return float(out_value.reshape(())), np.zeros_like(values)

    grads = trace.backward(out)
    g = grads[leaf.index]
    g = np.zeros_like(values) if g is None else np.array(g, dtype=np.float64)
    if not np.all(np.isfinite(g)):
        raise NumericError(f"{f.name}: non-finite gradient", primitive="backward")
    return float(out_value.reshape(())), g


def jacobian(g: DiffFunction, theta: Any, z: Any = None) -> np.ndarray:
    """
    Jacobian of a vector-valued DiffFunction, one row per flattened output.

    For a generator evaluated at a single latent vector this is the n×d matrix
    ``d g_i / d theta_j``; for a latent batch the rows are ordered sample-major.
    """
    values = _theta_values(g, theta)
    _check_inputs(g, z)
    trace, leaf, out = _traced(g, values, z)
    out_value = value_of(out)
    rows = out_value.size
    jac = np.zeros((rows, values.size))
    if not isinstance(out, Tensor):
        return jac
    seed = np.zeros(rows)
    for i in range(rows):
        seed[i] = 1.0
        grads = trace.backward(out, seed=seed)
        seed[i] = 0.0
        if grads[leaf.index] is not None:
            jac[i] = grads[leaf.index]
    if not np.all(np.isfinite(jac)):
        raise NumericError(f"{g.name}: non-finite Jacobian", primitive="backward")
    return jac


@dataclass(frozen=True)
class FiniteDiffReport:
    """Coordinate-wise comparison of exact and central-difference gradients."""

    max_rel_error: float
    worst_coordinate: Optional[int]
    non_comparable: tuple[int, ...]
    analytic: np.ndarray = field(repr=False)
    numeric: np.ndarray = field(repr=False)
    relative_errors: np.ndarray = field(repr=False)


def _value_and_kinks(f: DiffFunction, values: np.ndarray, inputs: Any) -> tuple[float, tuple]:
    trace, _, out = _traced(f, values, inputs)
    return float(value_of(out).reshape(())), tuple(trace.kinks)


def finite_diff_check(
    f: DiffFunction,
    theta: Any,
    step: float = 1e-5,
    inputs: Any = None,
    atol: float = 1e-10,
    scale_floor: float = 0.0,
) -> FiniteDiffReport:
    """
    Compare :func:`grad_scalar` against central differences.

    The relative error of coordinate j is ``|a_j - n_j| / max(|a_j|, |n_j|, floor)``
    with ``floor = max(atol, scale_floor * max|a|)``. The default judges every
    coordinate on its own scale; a positive ``scale_floor`` judges coordinates
    with negligible gradient against the gradient's overall scale instead.
    A coordinate is non-comparable when the kink pattern at ``theta ± step e_j``
    differs from the one at ``theta``.
    """
    if step <= 0:
        raise ConfigurationError(f"Finite-difference step must be positive, got {step}")
    if scale_floor < 0:
        raise ConfigurationError(f"scale_floor must be nonnegative, got {scale_floor}")
    values = _theta_values(f, theta)
    _, analytic = grad_scalar(f, values, inputs)
    _, base_kinks = _value_and_kinks(f, values, inputs)

    numeric = np.full(values.size, np.nan)
    rel = np.zeros(values.size)
    skipped: list[int] = []
    floor = max(atol, scale_floor * float(np.max(np.abs(analytic), initial=0.0)))
    for j in range(values.size):
        shift = np.zeros_like(values)
        shift[j] = step
        plus, plus_kinks = _value_and_kinks(f, values + shift, inputs)
        minus, minus_kinks = _value_and_kinks(f, values - shift, inputs)
        if plus_kinks != base_kinks or minus_kinks != base_kinks:
            skipped.append(j)
            continue
        numeric[j] = (plus - minus) / (2.0 * step)
        denom = max(abs(analytic[j]), abs(numeric[j]), floor)
        rel[j] = abs(analytic[j] - numeric[j]) / denom

    worst = int(np.argmax(rel)) if values.size and rel.max() > 0 else None
    report = FiniteDiffReport(
        max_rel_error=float(rel.max()) if values.size else 0.0,
        worst_coordinate=worst,
        non_comparable=tuple(skipped),
        analytic=analytic,
        numeric=numeric,
        relative_errors=rel,
    )
    logger.debug("finite_diff_check %s: %s", f.name, report)
    return report
