"""Small input-checking helpers used across the public functions."""
import math
import numbers

import numpy as np

from .exceptions import InvalidArgumentError


def check_scalar(value, name, *, min_value=None, max_value=None,
                 include_min=True, include_max=True):
    """Return ``value`` as a finite float, raising InvalidArgumentError otherwise."""
    if isinstance(value, bool) or not isinstance(value, (numbers.Real, np.floating, np.integer)):
        raise InvalidArgumentError(f"{name} must be a real number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise InvalidArgumentError(f"{name} must be finite, got {value}")
    if min_value is not None:
        if value < min_value or (not include_min and value == min_value):
            op = ">=" if include_min else ">"
            raise InvalidArgumentError(f"{name} must be {op} {min_value}, got {value}")
    if max_value is not None:
        if value > max_value or (not include_max and value == max_value):
            op = "<=" if include_max else "<"
            raise InvalidArgumentError(f"{name} must be {op} {max_value}, got {value}")
    return value


def check_finite_array(values, name, *, ndim=None, nonnegative=False,
                       allow_empty=False):
    """Coerce ``values`` to a float64 array and validate it."""
    try:
        arr = np.asarray(values, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise InvalidArgumentError(f"{name} must be numeric: {exc}") from None
    if ndim is not None and arr.ndim != ndim:
        raise InvalidArgumentError(f"{name} must be {ndim}-D, got shape {arr.shape}")
    if not allow_empty and arr.size == 0:
        raise InvalidArgumentError(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} contains non-finite values")
    if nonnegative and np.any(arr < 0):
        raise InvalidArgumentError(f"{name} must be non-negative")
    return arr


def check_seed(seed):
    if isinstance(seed, bool) or not isinstance(seed, (numbers.Integral, np.integer)) or seed < 0:
        raise InvalidArgumentError(f"seed must be a non-negative integer, got {seed!r}")
    return int(seed)


def check_image(image, name="image"):
    """Validate a 2-D finite image plane."""
    arr = check_finite_array(image, name, ndim=2)
    return arr
