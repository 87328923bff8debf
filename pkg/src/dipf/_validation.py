"""Input checks shared across the package."""

import numpy as np

MIN_SIDE = 3


class StageError(ValueError):
    """Raised when an input fails a pipeline precondition.

    ``stage`` names the check that failed so CLI messages can point at it.
    """

    def __init__(self, stage, message):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


def check_gray(img, name="image"):
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if min(arr.shape) < MIN_SIDE:
        raise ValueError(f"{name} must be at least {MIN_SIDE}x{MIN_SIDE}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_rgb(img, name="image"):
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"{name} must have shape (H, W, 3), got {arr.shape}")
    if min(arr.shape[:2]) < MIN_SIDE:
        raise ValueError(f"{name} must be at least {MIN_SIDE}x{MIN_SIDE}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def as_rgb(img, name="image"):
    """Accept gray or RGB input and return an RGB array."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 2:
        arr = np.repeat(arr[..., None], 3, axis=-1)
    return check_rgb(arr, name)


def as_gray(img, name="image"):
    """Accept gray or RGB input and return a gray array (BT.601 luma for RGB)."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 3:
        arr = check_rgb(arr, name) @ np.array([0.299, 0.587, 0.114])
    return check_gray(arr, name)


def check_same_shape(*arrays, stage="shape"):
    shapes = {np.shape(a)[:2] for a in arrays}
    if len(shapes) != 1:
        raise StageError(stage, f"dimension mismatch: {sorted(shapes)}")
