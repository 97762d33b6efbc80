"""Input validation helpers shared by the estimators and operations."""

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import DimensionMismatch


def check_box(box, d=None):
    """Return a box as a ``(2, d)`` float array ``[lo, hi]``.

    Accepts ``(lo, hi)`` pairs of sequences or a ``(2, d)`` array.
    """
    arr = np.asarray(box, dtype=float)
    if arr.ndim == 1 and arr.size == 2:
        arr = arr.reshape(2, 1)
    if arr.ndim != 2 or arr.shape[0] != 2:
        raise ValueError(f"box must have shape (2, d), got {arr.shape}")
    if d is not None and arr.shape[1] != d:
        raise DimensionMismatch(f"box has dimension {arr.shape[1]}, expected {d}")
    if not np.all(arr[1] > arr[0]):
        raise ValueError("box must satisfy hi > lo in every coordinate")
    return arr


def check_lambda(Lambda, n=None, d=None):
    """Validate a single deformation gradient, returned as an ``(n, d)`` array."""
    L = np.atleast_2d(np.asarray(Lambda, dtype=float))
    if L.ndim != 2:
        raise DimensionMismatch("Lambda must be a matrix")
    if n is not None and d is not None and L.size == n * d and L.shape != (n, d):
        L = L.reshape(n, d)
    if (n is not None and L.shape[0] != n) or (d is not None and L.shape[1] != d):
        raise DimensionMismatch(f"Lambda has shape {L.shape}, expected ({n}, {d})")
    if not np.all(np.isfinite(L)):
        raise ValueError("Lambda must be finite")
    return L


def check_lambdas(X, n, d):
    """Validate a batch of deformation gradients for estimator ``predict`` calls.

    ``X`` may be ``(k, n, d)`` or flattened ``(k, n*d)``; returns ``(k, n, d)``.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 3:
        if X.shape[1:] != (n, d):
            raise DimensionMismatch(f"expected (k, {n}, {d}), got {X.shape}")
        flat = X.reshape(len(X), -1)
    else:
        flat = X
    flat = check_array(flat, ensure_2d=True, dtype=float)
    if flat.shape[1] != n * d:
        raise DimensionMismatch(f"expected {n * d} features, got {flat.shape[1]}")
    return flat.reshape(-1, n, d)


def check_positive(value, name):
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be positive and finite, got {value}")
    return value
