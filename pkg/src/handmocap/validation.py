"""Small input-validation helpers used across the public API."""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError


def as_float_array(x, name: str, shape: tuple | None = None) -> np.ndarray:
    """Coerce to a float64 array, optionally enforcing an exact shape."""
    if type(x) is np.ndarray and x.dtype == np.float64:
        # Hot path: already the right kind of array (asarray would return
        # the same object anyway), so only the shape needs checking.
        if shape is not None and x.shape != shape:
            raise InvalidInputError(
                f"{name}: expected shape {shape}, got {x.shape}")
        return x
    try:
        a = np.asarray(x, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise InvalidInputError(f"{name}: not numeric ({exc})") from exc
    if shape is not None and a.shape != shape:
        raise InvalidInputError(f"{name}: expected shape {shape}, got {a.shape}")
    return a


def check_finite(a: np.ndarray, name: str) -> np.ndarray:
    if not np.all(np.isfinite(a)):
        raise InvalidInputError(f"{name}: contains non-finite values")
    return a


def check_points(x, name: str) -> np.ndarray:
    """Validate an (N, 3) stack of finite points."""
    a = as_float_array(x, name)
    if a.ndim != 2 or a.shape[1] != 3:
        raise InvalidInputError(f"{name}: expected (N, 3) points, got {a.shape}")
    return check_finite(a, name)


def check_unit_quaternion(q, name: str, tol: float = 1e-9) -> np.ndarray:
    a = as_float_array(q, name, (4,))
    check_finite(a, name)
    n = float(np.linalg.norm(a))
    if abs(n - 1.0) > tol:
        raise InvalidInputError(
            f"{name}: quaternion norm {n:.12g} deviates from 1 beyond {tol:g}")
    return a
