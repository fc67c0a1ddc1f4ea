"""Input validation helpers shared by the estimators and the functional API."""

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import DomainError


def as_vector(x, dim, name="x"):
    arr = np.asarray(x, dtype=float)
    if arr.shape != (dim,):
        raise DomainError(f"{name} must have shape ({dim},), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} has non-finite entries")
    return arr


def as_spd(Q, dim, name="Q"):
    """Coerce ``Q`` to a symmetric positive definite ``dim x dim`` matrix.

    A flat list of ``dim`` numbers is read as a diagonal.
    """
    arr = np.asarray(Q, dtype=float)
    if arr.shape == (dim,):
        arr = np.diag(arr)
    if arr.shape != (dim, dim):
        raise DomainError(f"{name} must be {dim}x{dim} or a length-{dim} diagonal")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} has non-finite entries")
    if np.abs(arr - arr.T).max() > 1e-12 * max(np.abs(arr).max(), 1.0):
        raise DomainError(f"{name} is not symmetric")
    arr = 0.5 * (arr + arr.T)
    if np.linalg.eigvalsh(arr)[0] <= 0:
        raise DomainError(f"{name} is not positive definite")
    return arr


def check_points(X, dim):
    """Validate an ``(n, dim)`` sample array the way scikit-learn estimators do."""
    X = check_array(X, dtype=float, ensure_min_samples=dim + 1)
    if X.shape[1] != dim:
        raise ValueError(f"expected {dim} columns, got {X.shape[1]}")
    return X
