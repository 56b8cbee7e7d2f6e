"""
Flat parameter vectors with a named-slice layout.

Model parameters (generator θ, discriminator ω, potential p) are stored as one
contiguous float64 vector so optimizers and metric tensors can treat them as
points of R^d, while models read back named, shaped blocks.

Author: wprox developers
"""

import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from wprox.exceptions import ConfigurationError, NumericError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ParamSlice:
    """One named block of a ParamVector."""

    name: str
    offset: int
    length: int
    shape: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.length < 0 or self.offset < 0:
            raise ConfigurationError(f"Negative offset/length in slice {self.name!r}")
        if self.shape and int(np.prod(self.shape)) != self.length:
            raise ConfigurationError(
                f"Slice {self.name!r}: shape {self.shape} does not hold {self.length} values"
            )

    @property
    def block_shape(self) -> tuple[int, ...]:
        return self.shape if self.shape else (self.length,)


@dataclass(frozen=True, eq=False)
class ParamVector:
    """
    Immutable parameter vector.

    Parameters
    ----------
    values : np.ndarray
        Flat float64 values; copied and made read-only.
    layout : tuple of ParamSlice
        Disjoint, contiguous slices covering ``values`` in order.
    """

    values: np.ndarray
    layout: tuple[ParamSlice, ...]

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64).reshape(-1)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "layout", tuple(self.layout))

        offset = 0
        for s in self.layout:
            if s.offset != offset:
                raise ConfigurationError(
                    f"Slice {s.name!r} starts at {s.offset}, expected {offset}"
                )
            offset += s.length
        if offset != values.size:
            raise ConfigurationError(
                f"Layout covers {offset} values but vector has {values.size}"
            )
        names = [s.name for s in self.layout]
        if len(set(names)) != len(names):
            raise ConfigurationError(f"Duplicate slice names in layout: {names}")
        if not np.all(np.isfinite(values)):
            raise NumericError("ParamVector contains non-finite entries", primitive="params")

    # ------------------------------------------------------------------
    # construction
    # ------------------------------------------------------------------

    @classmethod
    def from_shapes(
        cls,
        shapes: list[tuple[str, tuple[int, ...]]],
        values: Optional[np.ndarray] = None,
    ) -> "ParamVector":
        """Build a layout from ``(name, shape)`` pairs; values default to zeros."""
        layout = []
        offset = 0
        for name, shape in shapes:
            length = int(np.prod(shape)) if shape else 1
            layout.append(ParamSlice(name, offset, length, tuple(shape)))
            offset += length
        if values is None:
            values = np.zeros(offset)
        return cls(np.asarray(values, dtype=np.float64), tuple(layout))

    @classmethod
    def flat(cls, values: Union[np.ndarray, list[float]], name: str = "theta") -> "ParamVector":
        """Single-slice vector."""
        arr = np.asarray(values, dtype=np.float64).reshape(-1)
        return cls(arr, (ParamSlice(name, 0, arr.size),))

    def with_values(self, values: np.ndarray) -> "ParamVector":
        """Same layout, new values."""
        arr = np.asarray(values, dtype=np.float64).reshape(-1)
        if arr.size != self.values.size:
            raise ConfigurationError(
                f"Expected {self.values.size} values for this layout, got {arr.size}"
            )
        return ParamVector(arr, self.layout)

    # ------------------------------------------------------------------
    # access
    # ------------------------------------------------------------------

    def __len__(self) -> int:
        return int(self.values.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ParamVector):
            return NotImplemented
        return self.layout == other.layout and np.array_equal(self.values, other.values)

    def __hash__(self) -> int:
        return hash((self.layout, self.values.tobytes()))

    @property
    def names(self) -> list[str]:
        return [s.name for s in self.layout]

    def slice_of(self, name: str) -> ParamSlice:
        for s in self.layout:
            if s.name == name:
                return s
        raise KeyError(f"No slice named {name!r}; have {self.names}")

    def block(self, name: str) -> np.ndarray:
        """Values of one slice, reshaped to its declared shape."""
        s = self.slice_of(name)
        return self.values[s.offset : s.offset + s.length].reshape(s.block_shape)

    # ------------------------------------------------------------------
    # text form
    # ------------------------------------------------------------------

    def layout_header(self) -> str:
        """``name:offset:length:shape`` entries separated by spaces."""
        parts = []
        for s in self.layout:
            shape = "x".join(str(d) for d in s.shape) if s.shape else "-"
            parts.append(f"{s.name}:{s.offset}:{s.length}:{shape}")
        return " ".join(parts)

    @staticmethod
    def parse_layout_header(text: str) -> tuple[ParamSlice, ...]:
        slices = []
        for token in text.split():
            try:
                name, offset, length, shape = token.split(":")
                dims = () if shape == "-" else tuple(int(d) for d in shape.split("x"))
                slices.append(ParamSlice(name, int(offset), int(length), dims))
            except ValueError as exc:
                raise ConfigurationError(f"Malformed layout entry {token!r}") from exc
        return tuple(slices)
