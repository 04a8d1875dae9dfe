"""Input validation helpers shared across the package."""

from __future__ import annotations

import numpy as np

__all__ = [
    "as_float_vector",
    "check_finite",
    "check_positive",
    "check_in_range",
]


def as_float_vector(x, name: str, *, min_len: int = 1) -> np.ndarray:
    """Coerce ``x`` to a contiguous 1-D float64 array and validate it.

    Parameters
    ----------
    x : array_like
        Input sequence.
    name : str
        Name used in error messages.
    min_len : int
        Minimum allowed length.

    Returns
    -------
    ndarray
        1-D float64 array with finite entries.
    """
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 2 and 1 in arr.shape:
        arr = arr.ravel()
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    if arr.size < min_len:
        raise ValueError(f"{name} must have length >= {min_len}, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return np.ascontiguousarray(arr)


def check_finite(x: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite values")


def check_positive(value: float, name: str, *, strict: bool = True) -> None:
    if strict and not value > 0:
        raise ValueError(f"{name} must be > 0, got {value}")
    if not strict and not value >= 0:
        raise ValueError(f"{name} must be >= 0, got {value}")


def check_in_range(value: float, lo: float, hi: float, name: str) -> None:
    if not (lo <= value <= hi):
        raise ValueError(f"{name} must lie in [{lo}, {hi}], got {value}")
