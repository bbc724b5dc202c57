"""Small argument checks shared across the package."""
import math
import numbers

import numpy as np

SUM_TOL = 1e-9


class ConfigurationError(ValueError):
    """Raised for invalid configuration or malformed inputs."""


class DivergenceError(FloatingPointError):
    """Raised when a learner update produces a non-finite value."""


def check_positive(value, name, allow_zero=False):
    if not isinstance(value, numbers.Real) or not math.isfinite(value):
        raise ConfigurationError(f"{name} must be a finite real, got {value!r}")
    if value < 0 or (value == 0 and not allow_zero):
        bound = ">= 0" if allow_zero else "> 0"
        raise ConfigurationError(f"{name} must be {bound}, got {value!r}")
    return float(value)


def check_interval(value, name, low, high, low_open=False, high_open=False):
    if not isinstance(value, numbers.Real) or not math.isfinite(value):
        raise ConfigurationError(f"{name} must be a finite real, got {value!r}")
    bad_low = value <= low if low_open else value < low
    bad_high = value >= high if high_open else value > high
    if bad_low or bad_high:
        lb = "(" if low_open else "["
        hb = ")" if high_open else "]"
        raise ConfigurationError(f"{name}={value!r} outside {lb}{low}, {high}{hb}")
    return float(value)


def check_int(value, name, minimum=None):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ConfigurationError(f"{name} must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigurationError(f"{name} must be >= {minimum}, got {value!r}")
    return int(value)


def check_distribution(p, name="distribution", n=None):
    """Return ``p`` as a float array after checking it lies on the simplex."""
    arr = np.asarray(p, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ConfigurationError(f"{name} must be a non-empty 1-d vector")
    if n is not None and arr.size != n:
        raise ConfigurationError(f"{name} has {arr.size} entries, expected {n}")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise ConfigurationError(f"{name} has negative or non-finite entries")
    if abs(arr.sum() - 1.0) > SUM_TOL:
        raise ConfigurationError(f"{name} sums to {arr.sum()!r}, not 1")
    return arr


def check_finite_vector(v, name):
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ConfigurationError(f"{name} must be a non-empty 1-d vector")
    if not np.all(np.isfinite(arr)):
        raise ConfigurationError(f"{name} has non-finite entries")
    return arr
