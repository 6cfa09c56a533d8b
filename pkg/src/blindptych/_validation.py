"""Input checks shared by the public functions and the estimator."""

import numbers

import numpy as np


def check_image(img, name="image", dtype=complex):
    """Return ``img`` as a square 2-D array of ``dtype``.

    Raises ``ValueError`` for non-square, zero-size or non-finite input.
    """
    arr = np.asarray(img, dtype=dtype)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be a square 2-D array, got shape {arr.shape}")
    if arr.shape[0] == 0:
        raise ValueError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


def check_stack(stack, name="stack", dtype=complex, side=None):
    """Return ``stack`` as an ``(m, N, N)`` array, optionally checking ``N``."""
    arr = np.asarray(stack, dtype=dtype)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3 or arr.shape[1] != arr.shape[2] or arr.shape[0] == 0:
        raise ValueError(f"{name} must have shape (m, N, N), got {arr.shape}")
    if side is not None and arr.shape[1] != side:
        raise ValueError(f"{name} has side {arr.shape[1]}, expected {side}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


def check_same_side(*arrays):
    sides = {a.shape[-1] for a in arrays}
    if len(sides) != 1:
        raise ValueError(f"size mismatch: sides {sorted(sides)}")
    return sides.pop()


def check_positive(value, name, strict=True):
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ValueError(f"{name} must be a finite real number, got {value!r}")
    if value < 0 or (strict and value == 0):
        raise ValueError(f"{name} must be {'> 0' if strict else '>= 0'}, got {value}")
    return float(value)


def check_mask(mask, side, name="support"):
    """Boolean ``(side, side)`` mask from a mask or an iterable of flat indices."""
    arr = np.asarray(mask)
    if arr.dtype == bool:
        if arr.shape != (side, side):
            raise ValueError(f"{name} mask must have shape {(side, side)}, got {arr.shape}")
        return arr.copy()
    flat = np.zeros(side * side, dtype=bool)
    idx = arr.astype(np.int64).ravel()
    if idx.size and (idx.min() < 0 or idx.max() >= side * side):
        raise IndexError(f"{name} index out of range for side {side}")
    flat[idx] = True
    return flat.reshape(side, side)
