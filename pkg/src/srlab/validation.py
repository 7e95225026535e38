"""Input validation helpers (scalar ranges, increment arrays, state shapes)."""

import math

import numpy as np

from .errors import DimensionMismatch, OutOfRange


def check_scalar(name, value, lo=None, hi=None, inclusive_lo=True, inclusive_hi=True):
    """Validate a finite scalar against [lo, hi] bounds; returns the float."""
    try:
        x = float(value)
    except (TypeError, ValueError):
        raise OutOfRange(f"{name} must be a real number, got {value!r}")
    if not math.isfinite(x):
        raise OutOfRange(f"{name} must be finite, got {value!r}")
    if lo is not None:
        if x < lo or (not inclusive_lo and x == lo):
            raise OutOfRange(f"{name}={x} below the valid range ({lo}, {hi})")
    if hi is not None:
        if x > hi or (not inclusive_hi and x == hi):
            raise OutOfRange(f"{name}={x} above the valid range ({lo}, {hi})")
    return x


def check_unit_open(name, value):
    """Validate a probability-like parameter in the open interval (0, 1)."""
    return check_scalar(name, value, 0.0, 1.0, inclusive_lo=False, inclusive_hi=False)


def check_int(name, value, lo=None, hi=None):
    if isinstance(value, bool) or int(value) != value:
        raise OutOfRange(f"{name} must be an integer, got {value!r}")
    v = int(value)
    if lo is not None and v < lo:
        raise OutOfRange(f"{name}={v} below the valid range [{lo}, {hi}]")
    if hi is not None and v > hi:
        raise OutOfRange(f"{name}={v} above the valid range [{lo}, {hi}]")
    return v


def as_increments(x):
    """Coerce LLR increments to a finite 1-d float64 array."""
    z = np.asarray(x, dtype=float)
    if z.ndim != 1:
        raise OutOfRange(f"increments must be 1-d, got shape {z.shape}")
    if not np.all(np.isfinite(z)):
        raise OutOfRange("increments contain NaN or Inf")
    return z


def as_state(model, x):
    """Coerce a single state to the model's shape; scalar models accept floats."""
    arr = np.asarray(x, dtype=float)
    if model.dim == 1:
        if arr.shape not in ((), (1,)):
            raise DimensionMismatch(
                f"model {model.name!r} has dim=1, got state of shape {arr.shape}")
        arr = arr.reshape(())
    else:
        if arr.shape != (model.dim,):
            raise DimensionMismatch(
                f"model {model.name!r} has dim={model.dim}, got state of shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DimensionMismatch("state contains NaN or Inf")
    return arr
