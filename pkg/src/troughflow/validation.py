"""Small input-validation helpers used across the package."""

import numpy as np

from .errors import DomainError


def check_in_range(name, value, lo=None, hi=None):
    """Raise DomainError naming the violated bound; returns the value.

    Works on scalars and arrays (any element out of range fails).
    """
    arr = np.asarray(value)
    if lo is not None and np.any(arr < lo):
        raise DomainError(f"{name} must be >= {lo}, got {np.min(arr)}")
    if hi is not None and np.any(arr > hi):
        raise DomainError(f"{name} must be <= {hi}, got {np.max(arr)}")
    return value


def check_positive(name, value, strict=True):
    arr = np.asarray(value)
    if strict and np.any(arr <= 0):
        raise DomainError(f"{name} must be > 0, got {np.min(arr)}")
    if not strict and np.any(arr < 0):
        raise DomainError(f"{name} must be >= 0, got {np.min(arr)}")
    return value


def as_float_array(name, value, length=None):
    arr = np.asarray(value, dtype=float)
    if length is not None and arr.shape[-1] != length:
        raise DomainError(f"{name} must have length {length}, got {arr.shape[-1]}")
    return arr
