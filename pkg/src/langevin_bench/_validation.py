"""Input checks shared by the estimator wrappers."""
from __future__ import annotations

import numbers

import numpy as np
from sklearn.utils.validation import check_array

__all__ = ["check_data", "check_seed", "check_positive", "check_fraction"]


def check_data(X, *, min_samples: int = 1, n_features: int | None = None) -> np.ndarray:
    """2-D finite float64 array with at least ``min_samples`` rows."""
    X = check_array(X, dtype=np.float64, ensure_min_samples=min_samples, ensure_all_finite=True)
    if n_features is not None and X.shape[1] != n_features:
        raise ValueError(f"X has {X.shape[1]} features, expected {n_features}")
    return np.ascontiguousarray(X)


def check_seed(random_state) -> int:
    """Integer seed for :class:`RngStream`; ``None`` maps to 0 so runs stay reproducible."""
    if random_state is None:
        return 0
    if isinstance(random_state, numbers.Integral) and not isinstance(random_state, bool):
        if random_state < 0:
            raise ValueError("random_state must be nonnegative")
        return int(random_state)
    raise TypeError(f"random_state must be an int or None, got {type(random_state).__name__}")


def check_positive(name: str, value, *, allow_none: bool = False):
    if value is None and allow_none:
        return None
    if isinstance(value, bool) or not isinstance(value, numbers.Real) or not value > 0:
        raise ValueError(f"{name} must be a positive number, got {value!r}")
    return value


def check_fraction(name: str, value: float) -> float:
    if not 0.0 <= value < 1.0:
        raise ValueError(f"{name} must lie in [0, 1), got {value!r}")
    return float(value)
