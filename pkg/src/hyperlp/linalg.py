"""Minimal dense linear algebra contracts.

Vectors are 1-D float64 ndarrays, matrices 2-D row-major float64
ndarrays. Storage and arithmetic are delegated to numpy; this module
owns the validation (shape agreement, finiteness) that the rest of the
package relies on. Values are treated as immutable once built and are
safe to share read-only across workers.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError


def as_vector(data) -> np.ndarray:
    """Coerce to a finite 1-D float64 array."""
    v = np.ascontiguousarray(data, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionError(f"expected 1-D vector, got shape {v.shape}")
    check_finite(v, "vector")
    return v


def as_matrix(data) -> np.ndarray:
    """Coerce to a finite 2-D row-major float64 array."""
    a = np.ascontiguousarray(data, dtype=np.float64)
    if a.ndim != 2:
        raise DimensionError(f"expected 2-D matrix, got shape {a.shape}")
    check_finite(a, "matrix")
    return a


def check_finite(arr: np.ndarray, name: str = "array") -> None:
    if not np.all(np.isfinite(arr)):
        raise DimensionError(f"{name} contains non-finite entries")


def dot(a, b) -> float:
    a = as_vector(a)
    b = as_vector(b)
    if a.shape[0] != b.shape[0]:
        raise DimensionError(f"dot: length mismatch {a.shape[0]} vs {b.shape[0]}")
    return float(a @ b)


def matvec(A, x) -> np.ndarray:
    A = as_matrix(A)
    x = as_vector(x)
    if A.shape[1] != x.shape[0]:
        raise DimensionError(f"matvec: {A.shape} x {x.shape[0]} incompatible")
    return A @ x


def norm_inf(x) -> float:
    x = as_vector(x)
    if x.shape[0] == 0:
        raise DimensionError("norm_inf of empty vector")
    return float(np.max(np.abs(x)))
