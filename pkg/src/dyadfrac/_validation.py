"""Input validation helpers shared by the estimators and functional API."""

import numbers

import numpy as np

from .exceptions import InvalidParameterError, ScaleOverflowError

DEFAULT_MAX_SCALE = 26


def check_scale(j, max_scale=DEFAULT_MAX_SCALE, name="j"):
    if isinstance(j, (bool, np.bool_)) or not isinstance(j, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {type(j).__name__}")
    j = int(j)
    if j < 0:
        raise InvalidParameterError(f"{name} must be >= 0, got {j}")
    if j > max_scale:
        raise ScaleOverflowError(f"{name}={j} exceeds the maximum scale {max_scale}")
    return j


def check_real(x, name, low=None, high=None, low_inclusive=True, high_inclusive=True):
    """Return ``x`` as float after checking it lies in the given range."""
    if isinstance(x, bool) or not isinstance(x, numbers.Real):
        raise TypeError(f"{name} must be a real number, got {type(x).__name__}")
    x = float(x)
    if not np.isfinite(x):
        raise InvalidParameterError(f"{name} must be finite, got {x}")
    if low is not None and (x < low or (x == low and not low_inclusive)):
        op = ">=" if low_inclusive else ">"
        raise InvalidParameterError(f"{name} must be {op} {low}, got {x}")
    if high is not None and (x > high or (x == high and not high_inclusive)):
        op = "<=" if high_inclusive else "<"
        raise InvalidParameterError(f"{name} must be {op} {high}, got {x}")
    return x


def check_seed(seed):
    if isinstance(seed, bool) or not isinstance(seed, numbers.Integral):
        raise TypeError(f"seed must be an integer, got {type(seed).__name__}")
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise InvalidParameterError(f"seed must fit in 64 unsigned bits, got {seed}")
    return seed


def check_scale_window(j_min, j_max, max_scale=DEFAULT_MAX_SCALE):
    j_min = check_scale(j_min, max_scale, "j_min")
    j_max = check_scale(j_max, max_scale, "j_max")
    if j_min >= j_max:
        raise InvalidParameterError(f"need j_min < j_max, got [{j_min}, {j_max}]")
    return j_min, j_max
