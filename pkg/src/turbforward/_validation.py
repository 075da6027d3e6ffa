"""Input coercion shared by the operators and the estimator."""

from __future__ import annotations

import numpy as np


def check_image(image, name: str = "image") -> tuple[np.ndarray, bool]:
    """Return a float64 2-D view of ``image`` and whether it was 1-D."""
    arr = np.asarray(image, dtype=float)
    if arr.ndim not in (1, 2):
        raise ValueError(f"{name} must be 1-D or 2-D, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError(f"{name} is empty")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite values")
    if arr.ndim == 1:
        return arr[None, :], True
    return arr, False


def restore_shape(arr: np.ndarray, was_1d: bool) -> np.ndarray:
    return arr[0] if was_1d else arr


def check_tilts(tilts, shape: tuple[int, int]) -> np.ndarray:
    """Coerce a TiltField, ``(H, W, 2)`` array or 1-D displacement vector to ``(H, W, 2)``."""
    values = getattr(tilts, "values", tilts)
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1 and shape[0] == 1:
        out = np.zeros((1, arr.shape[0], 2))
        out[0, :, 1] = arr
        arr = out
    elif arr.ndim == 2 and arr.shape[-1] == 2 and shape[0] == 1:
        arr = arr[None]
    if arr.shape != (shape[0], shape[1], 2):
        raise ValueError(f"tilts of shape {arr.shape} do not match image shape {shape}")
    if not np.isfinite(arr).all():
        raise ValueError("tilt magnitudes must be finite")
    return arr


def check_odd(value: int, name: str) -> int:
    value = int(value)
    if value < 1 or value % 2 == 0:
        raise ValueError(f"{name} must be a positive odd integer, got {value}")
    return value
