"""Synthetic co-registered visible/infrared scenes for tests and demos."""

import numpy as np
from scipy import ndimage


def _normalize(x):
    lo, hi = x.min(), x.max()
    return (x - lo) / (hi - lo) if hi > lo else np.zeros_like(x)


def make_pair(seed=0, shape=(240, 320)):
    """Return ``(vis_rgb, ir)`` sharing scene geometry.

    The visible image carries coloured texture, a few rectangles and a
    horizon; the infrared image carries the same objects as warm blobs over
    a cooler, smoother background.
    """
    rng = np.random.default_rng(seed)
    h, w = shape
    y, x = np.mgrid[0:h, 0:w]

    texture = ndimage.gaussian_filter(rng.random((h, w)), 1.5)
    texture = _normalize(texture)
    sky = (y < h * rng.uniform(0.3, 0.45)).astype(float)
    ground = ndimage.gaussian_filter(rng.random((h, w)), 6)
    ground = _normalize(ground)

    lum = 0.75 * sky + (1 - sky) * (0.25 + 0.35 * ground + 0.15 * texture)
    heat = 0.25 + 0.2 * _normalize(ndimage.gaussian_filter(rng.random((h, w)), 10)) * (1 - sky)
    heat += 0.1 * sky
    for _ in range(rng.integers(3, 6)):
        bh, bw = rng.integers(h // 10, h // 4), rng.integers(w // 12, w // 5)
        r0, c0 = rng.integers(h // 3, h - bh), rng.integers(0, w - bw)
        region = (slice(r0, r0 + bh), slice(c0, c0 + bw))
        lum[region] = rng.uniform(0.1, 0.9) + 0.1 * texture[region]
        heat[region] = rng.uniform(0.6, 0.95)
    ir = np.clip(ndimage.gaussian_filter(heat, 1.0) + 0.03 * texture, 0, 1)

    tint = rng.uniform(0.6, 1.0, 3)
    vis = np.clip(lum[..., None] * tint[None, None, :] / tint.mean(), 0, 1)
    vis[..., 2] = np.clip(vis[..., 2] + 0.15 * sky, 0, 1)
    return vis, ir
