"""Input validation helpers shared by the functional API and the estimators."""

import numbers

import numpy as np
from sklearn.utils import check_scalar


def check_fraction(f, name="f"):
    """Validate a transfer fraction, which must lie strictly inside (0, 1)."""
    if isinstance(f, np.generic):
        f = f.item()
    check_scalar(f, name, numbers.Real, min_val=0.0, max_val=1.0,
                 include_boundaries="neither")
    f = float(f)
    if not np.isfinite(f):
        raise ValueError(f"{name}={f!r} is not finite")
    return f


def check_positive_int(value, name, min_val=1):
    if isinstance(value, np.generic):
        value = value.item()
    check_scalar(value, name, numbers.Integral, min_val=min_val)
    return int(value)


def check_positive(value, name, include_zero=False):
    if isinstance(value, np.generic):
        value = value.item()
    check_scalar(value, name, numbers.Real, min_val=0.0,
                 include_boundaries="left" if include_zero else "neither")
    return float(value)


def check_wealth_grid(w, name="w_grid"):
    """Return ``w`` as a 1-D float array that is positive and strictly increasing."""
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or w.size < 2:
        raise ValueError(f"{name} must be a 1-D array with at least two points")
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise ValueError(f"{name} must contain finite positive values")
    if np.any(np.diff(w) <= 0):
        raise ValueError(f"{name} must be strictly increasing")
    return w
