"""Small numeric helpers used by several modules."""

from __future__ import annotations

import math

import numpy as np


def sigmoid(x: float) -> float:
    """Numerically stable logistic function for scalars."""
    xf = float(x)
    if xf >= 0.0:
        return 1.0 / (1.0 + math.exp(-xf))
    e = math.exp(xf)
    return e / (1.0 + e)


def sigmoid_vec(x: np.ndarray) -> np.ndarray:
    """Elementwise stable logistic function."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def require_finite(arr: np.ndarray, what: str) -> None:
    """Raise InvalidInputError unless every entry of `arr` is finite."""
    from .errors import InvalidInputError

    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{what} must be finite")


def as_float_vector(x, what: str) -> np.ndarray:
    """Coerce to a 1-D float64 vector, rejecting other shapes."""
    from .errors import InvalidInputError

    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise InvalidInputError(f"{what} must be a 1-D vector, got shape {arr.shape}")
    return arr
