"""Transmission-driven layer split and the scale-and-noise-aware filter.

The filter is an iterated weighted-least-squares smoother. Each pass solves

    (Id + Dx' W Dx + Dy' W Dy) O = I

with a per-pixel smoothness weight ``W`` recomputed from the previous pass.
The weight is large in flat or noisy regions and small across significant,
large-scale edges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ._solvers import solve_weighted_laplacian
from ._validation import check_gray, check_same_shape
from .imgcore import estimate_noise_level, gradient_magnitude, sobel_8dir

IR_KAPPA_SCALE = 0.01
BAND_KAPPA = 0.4
BAND_NOISE_RATE = 0.03


@dataclass(frozen=True)
class SanfParams:
    kappa: float = 0.4
    r: int = 1
    d: int = 3
    epsilon: float = 1e-4
    cg_rtol: float = 1e-4
    cg_maxiter: int = 500

    def __post_init__(self):
        if self.kappa < 0:
            raise ValueError("kappa must be >= 0")
        if self.r < 1 or self.d < 1:
            raise ValueError("r and d must be >= 1")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")


@dataclass
class LayerSet:
    CL: np.ndarray
    SL: np.ndarray
    IRp: np.ndarray


@dataclass
class BandSet:
    L: list
    H: list


def split_contrast_structure(vis_lum, t):
    """Contrast layer ``vis*(1-t)`` and structure layer ``vis*t``.

    The contrast layer is taken as the residual so that the two layers sum
    back to the luminance to the last bit.
    """
    vis_lum = check_gray(vis_lum, "visible luminance")
    t = np.asarray(t, dtype=np.float64)
    check_same_shape(vis_lum, t, stage="contrast/structure split")
    sl = vis_lum * t
    cl = vis_lum - sl
    return cl, sl


def noise_weight(img):
    """Square root of the mean 8-direction Sobel magnitude, per pixel."""
    return np.sqrt(sobel_8dir(img).mean(axis=0))


def scale_metric(grad, r, eps=1e-4):
    size = 2 * 3 * int(r) + 1
    local_mean = ndimage.uniform_filter(grad, size=size, mode="nearest")
    local_max = ndimage.maximum_filter(grad, size=size, mode="nearest")
    return np.clip(local_mean / (local_max + eps), 0.0, 1.0)


def smoothness_weight(prev, params):
    """Per-pixel smoothness weight computed from the previous iterate."""
    grad = gradient_magnitude(prev)
    gmax = grad.max()
    guide = grad / gmax if gmax > 0 else np.zeros_like(grad)
    penalty = 1.0 / (guide + 0.1)
    q = scale_metric(grad, params.r, params.epsilon)
    s = noise_weight(prev)
    return params.kappa / (penalty * guide * q * s + params.epsilon)


def wls_solve(img, weight, x0=None, rtol=1e-6, maxiter=500):
    """One weighted-least-squares pass: minimise ||O - img||^2 + sum W |grad O|^2."""
    out, _, _ = solve_weighted_laplacian(img, weight, x0=x0, rtol=rtol, maxiter=maxiter)
    return out


def sanf(img, params=None):
    """Scale-and-noise-aware filter (iterated weighted least squares)."""
    params = params or SanfParams()
    img = check_gray(img)
    if params.kappa == 0 or np.ptp(img) == 0:
        return img.copy()
    out = img
    for _ in range(params.d):
        weight = smoothness_weight(out, params)
        out = wls_solve(img, weight, x0=out, rtol=params.cg_rtol, maxiter=params.cg_maxiter)
    return out


def ir_kappa(sigma):
    """Smoothing strength for infrared preprocessing; None when the log guard applies."""
    if sigma <= 1.0:
        return None
    return IR_KAPPA_SCALE * math.log(sigma, 5)


def preprocess_infrared(ir, return_info=False):
    ir = check_gray(ir, "infrared")
    sigma = estimate_noise_level(ir)
    kappa = ir_kappa(sigma)
    out = ir.copy() if kappa is None else sanf(ir, SanfParams(kappa=kappa, r=1, d=3))
    if return_info:
        return out, {"sigma": sigma, "kappa": kappa}
    return out


def band_kappa(sigma):
    return BAND_KAPPA / math.exp(BAND_NOISE_RATE * sigma)


def band_decompose(layer, return_info=False):
    """Low band from the filter, high band as the exact residual."""
    layer = check_gray(layer)
    sigma = estimate_noise_level(layer)
    kappa = band_kappa(sigma)
    low = sanf(layer, SanfParams(kappa=kappa, r=1, d=3))
    high = layer - low
    if return_info:
        return low, high, {"sigma": sigma, "kappa": kappa}
    return low, high
