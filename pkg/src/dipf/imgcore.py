"""Image primitives shared by the decomposition, fusion and metric code.

Gray images are 2-D float64 arrays and RGB images are (H, W, 3) float64
arrays, both in the canonical [0, 1] intensity range. Quantities that the
fusion rules express on the 8-bit scale (noise levels) are converted at the
call site.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from ._validation import check_gray, check_rgb

# BT.601 luma and the matching YCbCr chroma rows
_RGB2YCC = np.array(
    [
        [0.299, 0.587, 0.114],
        [-0.168736, -0.331264, 0.5],
        [0.5, -0.418688, -0.081312],
    ]
)
_YCC2RGB = np.linalg.inv(_RGB2YCC)

HIST_BINS = 256
HIST_EPS = 1e-12


def to_luminance(img):
    """Split an RGB image into BT.601 luminance and (Cb, Cr) chroma planes.

    Returns ``(Y, chroma)`` where ``chroma`` has shape (H, W, 2). Feeding the
    same pair to :func:`from_luminance` reproduces the input.
    """
    img = check_rgb(img)
    ycc = img @ _RGB2YCC.T
    return ycc[..., 0].copy(), ycc[..., 1:].copy()


def from_luminance(lum, chroma, clip=True):
    """Recolor a luminance plane with chroma planes from :func:`to_luminance`."""
    lum = np.asarray(lum, dtype=np.float64)
    ycc = np.concatenate([lum[..., None], np.asarray(chroma, dtype=np.float64)], axis=-1)
    rgb = ycc @ _YCC2RGB.T
    if clip:
        rgb = np.clip(rgb, 0.0, 1.0)
    return rgb


def gray_to_rgb(img):
    img = np.asarray(img, dtype=np.float64)
    return np.repeat(img[..., None], 3, axis=-1)


def min_channel(img):
    """Per-pixel minimum over the colour channels, no spatial window."""
    return check_rgb(img).min(axis=-1)


def min_filter(img, radius):
    """Minimum over a (2r+1) x (2r+1) window with replicate-padded borders."""
    if radius < 0:
        raise ValueError(f"radius must be >= 0, got {radius}")
    img = np.asarray(img, dtype=np.float64)
    if radius == 0:
        return img.copy()
    return ndimage.minimum_filter(img, size=2 * int(radius) + 1, mode="nearest")


def dark_channel(img, radius=7):
    return min_filter(min_channel(img), radius)


def _sobel_kernels():
    # Base kernel responds to intensity increasing along +x (left to right).
    # Each further kernel is the previous one rotated by 45 degrees
    # counter-clockwise, by cycling the outer ring of the 3x3 stencil.
    base = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
    ring = [(0, 0), (0, 1), (0, 2), (1, 2), (2, 2), (2, 1), (2, 0), (1, 0)]
    kernels = [base]
    for _ in range(7):
        prev = kernels[-1]
        nxt = np.zeros((3, 3))
        for i, (r, c) in enumerate(ring):
            # counter-clockwise in image coordinates (row axis points down)
            r2, c2 = ring[(i - 1) % 8]
            nxt[r2, c2] = prev[r, c]
        kernels.append(nxt)
    return np.stack(kernels)


SOBEL_8 = _sobel_kernels()


def sobel_8dir(img):
    """Absolute responses of the Sobel kernel rotated to 0, 45, ..., 315 degrees.

    Returns an array of shape (8, H, W). Direction ``k`` is sensitive to
    intensity increasing along the angle ``45*k`` degrees, measured
    counter-clockwise from the +x (column) axis.
    """
    img = np.asarray(img, dtype=np.float64)
    out = np.empty((8,) + img.shape)
    for k, kern in enumerate(SOBEL_8):
        # correlate: the kernel is read as a stencil, not flipped
        out[k] = np.abs(ndimage.correlate(img, kern, mode="nearest"))
    return out


def gradient_magnitude(img):
    gy, gx = np.gradient(np.asarray(img, dtype=np.float64))
    return np.hypot(gx, gy)


def total_variation(img):
    """Anisotropic total variation: sum of absolute forward differences."""
    img = np.asarray(img, dtype=np.float64)
    return float(np.abs(np.diff(img, axis=0)).sum() + np.abs(np.diff(img, axis=1)).sum())


def estimate_noise_level(img, block=8):
    """Additive Gaussian noise estimate, in 0-255 units.

    Robust MAD estimator on the diagonal (HH) coefficients of a one-level
    orthonormal Haar transform. Only the half of the blocks with the lowest
    gradient energy contribute, which keeps edges and texture from being
    mistaken for noise.
    """
    img = check_gray(img)
    h, w = img.shape
    h2, w2 = h - h % 2, w - w % 2
    x = img[:h2, :w2]
    hh = (x[0::2, 0::2] - x[0::2, 1::2] - x[1::2, 0::2] + x[1::2, 1::2]) / 2.0
    # gradient energy from the smooth part of the same 2x2 cells
    ll = (x[0::2, 0::2] + x[0::2, 1::2] + x[1::2, 0::2] + x[1::2, 1::2]) / 2.0
    hl = (x[0::2, 0::2] - x[0::2, 1::2] + x[1::2, 0::2] - x[1::2, 1::2]) / 2.0
    lh = (x[0::2, 0::2] + x[0::2, 1::2] - x[1::2, 0::2] - x[1::2, 1::2]) / 2.0
    gy, gx = np.gradient(ll)
    energy = hl**2 + lh**2 + gx**2 + gy**2

    bh = max(1, min(block, hh.shape[0]))
    bw = max(1, min(block, hh.shape[1]))
    nby, nbx = hh.shape[0] // bh, hh.shape[1] // bw
    coeffs = hh[: nby * bh, : nbx * bw].reshape(nby, bh, nbx, bw).swapaxes(1, 2)
    coeffs = coeffs.reshape(nby * nbx, bh * bw)
    e = energy[: nby * bh, : nbx * bw].reshape(nby, bh, nbx, bw).sum(axis=(1, 3)).ravel()
    keep = np.argsort(e, kind="stable")[: max(1, (nby * nbx) // 2)]
    sigma = np.median(np.abs(coeffs[keep])) / 0.6745
    return float(sigma * 255.0)


def histogram_pmf(img):
    """256-bin probability mass function of an image over [0, 1]."""
    img = np.asarray(img, dtype=np.float64)
    idx = np.clip(np.floor(np.clip(img, 0.0, 1.0) * HIST_BINS), 0, HIST_BINS - 1)
    counts = np.bincount(idx.astype(np.int64).ravel(), minlength=HIST_BINS)
    p = counts / counts.sum() + HIST_EPS
    return p / p.sum()


def entropy(p):
    """Shannon entropy in bits."""
    p = np.asarray(p, dtype=np.float64)
    nz = p[p > 0]
    return float(max(0.0, -(nz * np.log2(nz)).sum()))


def image_entropy(img):
    return entropy(histogram_pmf(img))
