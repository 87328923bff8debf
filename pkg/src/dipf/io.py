"""Image file I/O.

8-bit and 16-bit PNG/TIFF, grayscale or RGB. Decoding divides by the type
maximum; encoding clamps to [0, 1] and rounds half up. OpenCV stores
colour as BGR, so channels are swapped on the way in and out.
"""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

import cv2
import numpy as np

SUFFIXES = (".png", ".tif", ".tiff")
DEPTHS = {8: np.uint8, 16: np.uint16}


def read_image(path):
    """Read an image as float64 in [0, 1]; (H, W) for gray, (H, W, 3) for colour."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such image: {path}")
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise ValueError(f"cannot decode image: {path}")
    if raw.dtype not in (np.uint8, np.uint16):
        raise ValueError(f"{path}: unsupported sample type {raw.dtype}")
    img = raw.astype(np.float64) / np.iinfo(raw.dtype).max
    if img.ndim == 3:
        if img.shape[2] == 4:
            img = img[..., :3]
        # an (H, W, 1) TIFF is still gray
        img = img[..., 0] if img.shape[2] == 1 else img[..., ::-1]
    return np.ascontiguousarray(img)


def encode(img, depth=8):
    """Quantize [0, 1] floats to unsigned integers of the given bit depth."""
    if depth not in DEPTHS:
        raise ValueError("depth must be 8 or 16")
    top = float(np.iinfo(DEPTHS[depth]).max)
    return np.floor(np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0) * top + 0.5).astype(DEPTHS[depth])


def write_image(path, img, depth=8):
    """Write atomically: encode to a temporary file in the target directory, then rename."""
    path = Path(path)
    if path.suffix.lower() not in SUFFIXES:
        raise ValueError(f"unsupported output format {path.suffix!r}; use one of {SUFFIXES}")
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 3:
        img = img[..., ::-1]
    data = encode(img, depth)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(suffix=path.suffix, dir=path.parent)
    os.close(fd)
    try:
        if not cv2.imwrite(tmp, data):
            raise OSError(f"cannot write image: {path}")
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)
    return path


def find_pairs(directory):
    """Map ``name`` to ``(name_vis.ext, name_ir.ext)`` for every complete pair, sorted by name."""
    directory = Path(directory)
    if not directory.is_dir():
        raise NotADirectoryError(f"not a directory: {directory}")
    vis, ir = {}, {}
    for p in directory.iterdir():
        if p.suffix.lower() not in SUFFIXES:
            continue
        if p.stem.endswith("_vis"):
            vis[p.stem[:-4]] = p
        elif p.stem.endswith("_ir"):
            ir[p.stem[:-3]] = p
    return {name: (vis[name], ir[name]) for name in sorted(vis.keys() & ir.keys())}
