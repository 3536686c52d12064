"""Dense tensor helpers.

A tensor here is a plain C-order (row-major) numpy array. Production paths run
float32 end to end; the gradient-check harness pushes float64 arrays through the
same operations, so everything downstream preserves the dtype of its input.
"""
from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from .errors import ShapeError

# A shape is an ordered tuple of positive extents.
Shape = tuple[int, ...]

DTYPE = np.float32


def validate_shape(shape: Sequence[int]) -> Shape:
    """Return shape as a tuple of ints, rejecting empty or non-positive extents."""
    dims = tuple(int(d) for d in shape)
    if not dims:
        raise ShapeError("shape needs at least one extent")
    for d in dims:
        if d < 1:
            raise ShapeError(f"extents must be positive, got {dims}")
    return dims


def element_count(shape: Sequence[int]) -> int:
    return math.prod(validate_shape(shape))


def create(shape: Sequence[int], fill: float = 0.0) -> np.ndarray:
    """Allocate a float32 tensor of the given shape, filled with a constant."""
    return np.full(validate_shape(shape), fill, dtype=DTYPE)


def map_elementwise(t: np.ndarray, f: Callable[[float], float]) -> np.ndarray:
    """Apply a scalar function to every element, preserving shape and dtype.

    Generic hook for pointwise transforms; hot paths use numpy ufuncs directly.
    """
    out = np.array([f(float(v)) for v in t.ravel()], dtype=t.dtype)
    return out.reshape(t.shape)


def reshape(t: np.ndarray, new_shape: Sequence[int]) -> np.ndarray:
    """Reinterpret t with a new shape of identical element count (row-major order)."""
    dims = validate_shape(new_shape)
    if math.prod(dims) != t.size:
        raise ShapeError(
            f"cannot reshape {t.size} elements into {dims} "
            f"({math.prod(dims)} elements)"
        )
    return t.reshape(dims)
