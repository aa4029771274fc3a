"""Dense float64 vectors, the (x, v, u) iterate triple, and its metric."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class DimensionMismatchError(ValueError):
    """Two vectors (or triple components) do not share a dimension."""


def as_vector(data, name: str = "vector") -> np.ndarray:
    """Coerce ``data`` to a finite 1-D float64 array.

    Rejects empty input and any NaN/inf entry: solver state must fail
    loudly rather than propagate non-finite values.
    """
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    if arr.size < 1:
        raise ValueError(f"{name} must have dimension >= 1")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def euclidean_norm(v) -> float:
    """Euclidean norm sqrt(sum(v_i^2)); zero iff v is the zero vector."""
    return float(np.linalg.norm(as_vector(v)))


@dataclass(frozen=True)
class IterateTriple:
    """Solver state theta = (x, v, u), three vectors of equal dimension."""

    x: np.ndarray
    v: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        for name in ("x", "v", "u"):
            arr = as_vector(getattr(self, name), name).copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if not (self.x.shape == self.v.shape == self.u.shape):
            raise DimensionMismatchError(
                f"components differ in dimension: x={self.x.size}, "
                f"v={self.v.size}, u={self.u.size}"
            )

    @property
    def dim(self) -> int:
        return self.x.size


def metric_distance(a: IterateTriple, b: IterateTriple) -> float:
    """Distance (||x1-x2|| + ||v1-v2|| + ||u1-u2||) / sqrt(d) between triples.

    Symmetric, zero iff a == b, and satisfies the triangle inequality.
    """
    for name in ("x", "v", "u"):
        pa, pb = getattr(a, name), getattr(b, name)
        if pa.shape != pb.shape:
            raise DimensionMismatchError(
                f"{name} parts differ in dimension: {pa.size} vs {pb.size}"
            )
    total = (
        float(np.linalg.norm(a.x - b.x))
        + float(np.linalg.norm(a.v - b.v))
        + float(np.linalg.norm(a.u - b.u))
    )
    return total / math.sqrt(a.dim)
