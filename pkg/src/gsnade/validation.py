"""Input validation helpers shared across the package.

Everything downstream assumes float64 arrays; these helpers coerce and
complain early so numerics code can stay assertion-free.
"""

import numpy as np


def as_float_matrix(X, name="X"):
    """Coerce to a 2D float64 array with finite entries."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2:
        raise ValueError(f"{name} must be a 2D array, got ndim={X.ndim}")
    if X.size and not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains non-finite entries")
    return X


def is_binary(arr):
    arr = np.asarray(arr)
    return bool(np.all((arr == 0.0) | (arr == 1.0)))


def require_binary(arr, name="x"):
    if not is_binary(arr):
        raise ValueError(f"{name} must contain only 0.0 and 1.0 entries")
