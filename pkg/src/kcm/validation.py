"""Input validation helpers.

All checks raise :class:`~kcm.errors.ValidationError` naming the offending
value, so callers (and the CLI exit-code mapping) can treat every structural
problem uniformly.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError


def check_positive_int(name: str, value: int) -> int:
    if not isinstance(value, (int, np.integer)) or isinstance(value, bool) or value < 1:
        raise ValidationError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def check_fraction(name: str, value: float, *, closed_top: bool = True) -> float:
    value = float(value)
    top_ok = value <= 1.0 if closed_top else value < 1.0
    if not (np.isfinite(value) and 0.0 <= value and top_ok):
        raise ValidationError(f"{name} must be a fraction in [0, 1], got {value!r}")
    return value


def check_finite(name: str, arr: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


def check_tensor(name: str, arr: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    arr = np.asarray(arr)
    if arr.shape != shape:
        raise ValidationError(f"{name} has shape {arr.shape}, expected {shape}")
    return check_finite(name, arr)


def as_f32(name: str, arr: np.ndarray) -> np.ndarray:
    """Contiguous float32 view/copy of arr, validated finite."""
    out = np.ascontiguousarray(arr, dtype=np.float32)
    return check_finite(name, out)


def as_matrix(name: str, arr, *, ndim: int = 2) -> np.ndarray:
    out = np.asarray(arr, dtype=np.float64)
    if out.ndim != ndim:
        raise ValidationError(f"{name} must be {ndim}-dimensional, got ndim={out.ndim}")
    return check_finite(name, out)
