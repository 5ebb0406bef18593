"""Input checking helpers in the spirit of ``sklearn.utils.validation``."""
import numbers

import numpy as np

from .exceptions import InvalidInputError


def check_matrix(A, name="A", ndim=2, allow_empty=False):
    """Return ``A`` as a float64 array, rejecting wrong rank or non-finite data."""
    try:
        A = np.asarray(A, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise InvalidInputError(f"{name} is not numeric: {exc}") from exc
    if A.ndim != ndim:
        raise InvalidInputError(f"{name} must be {ndim}-D, got shape {A.shape}")
    if not allow_empty and A.size == 0:
        raise InvalidInputError(f"{name} is empty")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return A


def check_vector(v, name="v", length=None):
    v = check_matrix(v, name=name, ndim=1)
    if length is not None and v.shape[0] != length:
        raise InvalidInputError(f"{name} must have length {length}, got {v.shape[0]}")
    return v


def check_positive(x, name, strict=True):
    if not isinstance(x, numbers.Real) or not np.isfinite(x):
        raise InvalidInputError(f"{name} must be a finite real, got {x!r}")
    if (strict and x <= 0) or (not strict and x < 0):
        raise InvalidInputError(f"{name} must be {'>' if strict else '>='} 0, got {x!r}")
    return float(x)


def check_int(n, name, minimum=1):
    if isinstance(n, bool) or not isinstance(n, numbers.Integral):
        raise InvalidInputError(f"{name} must be an integer, got {n!r}")
    if n < minimum:
        raise InvalidInputError(f"{name} must be >= {minimum}, got {n}")
    return int(n)


def check_fraction(x, name):
    """Check ``0 < x < 1``."""
    x = check_positive(x, name)
    if x >= 1:
        raise InvalidInputError(f"{name} must lie in (0, 1), got {x!r}")
    return x
