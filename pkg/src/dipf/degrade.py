"""Procedural degradations for building stress-test image sets.

Every stochastic degradation takes an explicit ``seed`` and draws from a
fresh ``numpy.random.default_rng(seed)``, so equal seeds give bit-identical
outputs. Gray (H, W) and RGB (H, W, 3) inputs are both accepted; outputs
keep the input layout and stay in [0, 1].
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import ndimage, signal

KINDS = ("gaussian_noise", "haze", "rain", "snow", "overexposure", "blur")


@dataclass
class DegradeSpec:
    """Serializable record of one degradation, used in dataset manifests."""

    kind: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown degradation kind {self.kind!r}; expected one of {KINDS}")

    def to_dict(self):
        return asdict(self)


def _as_float(img):
    img = np.asarray(img, dtype=np.float64)
    if img.ndim not in (2, 3):
        raise ValueError(f"expected a gray or RGB image, got shape {img.shape}")
    return img


def _planes(img):
    return img[..., None] if img.ndim == 2 else img


def add_gaussian_noise(img, sigma255, seed=0):
    """Add i.i.d. normal noise with std ``sigma255/255`` per channel, then clamp."""
    if sigma255 < 0:
        raise ValueError("sigma must be >= 0")
    img = _as_float(img)
    if sigma255 == 0:
        return img.copy()
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(img.shape) * (sigma255 / 255.0)
    return np.clip(img + noise, 0.0, 1.0)


def synth_haze(img, t_field, A=0.9):
    """Forward scattering model ``I = J t + A (1 - t)``."""
    img = _as_float(img)
    t = np.asarray(t_field, dtype=np.float64)
    if np.any(t < 0) or np.any(t > 1):
        raise ValueError("t_field must lie in [0, 1]")
    if not 0 < A <= 1:
        raise ValueError("A must lie in (0, 1]")
    if img.ndim == 3 and t.ndim == 2:
        t = t[..., None]
    return np.clip(img * t + A * (1.0 - t), 0.0, 1.0)


def t_pattern(shape, kind="ramp", value=0.4, low=0.1, high=0.95):
    """Ground-truth transmission fields: ``constant``, ``ramp`` (left to right) or ``radial``."""
    h, w = shape[:2]
    if kind == "constant":
        return np.full((h, w), float(value))
    if kind == "ramp":
        return np.tile(np.linspace(low, high, w), (h, 1))
    if kind == "radial":
        y, x = np.mgrid[0:h, 0:w]
        r = np.hypot((y - (h - 1) / 2) / (h / 2), (x - (w - 1) / 2) / (w / 2))
        return high - (high - low) * np.clip(r / math.sqrt(2), 0.0, 1.0)
    raise ValueError(f"unknown t pattern {kind!r}")


def overexpose(img, gain=2.0, gamma=1.0, return_fraction=False):
    """``clamp((gain * img) ** gamma)``; optionally also the saturated fraction."""
    if gain < 1:
        raise ValueError("gain must be >= 1")
    if not 0 < gamma <= 1:
        raise ValueError("gamma must lie in (0, 1]")
    img = _as_float(img)
    out = np.clip((gain * img) ** gamma, 0.0, 1.0)
    if return_fraction:
        return out, saturated_fraction(out)
    return out


def saturated_fraction(img, level=1.0):
    return float(np.mean(np.asarray(img) >= level))


def _line_kernel(length, angle_deg):
    size = int(length) | 1
    k = np.zeros((size, size))
    c = size // 2
    a = math.radians(angle_deg)
    for s in np.linspace(-c, c, 4 * size):
        # angle measured from the +x axis, rows grow downwards
        r = int(round(c - s * math.sin(a)))
        q = int(round(c + s * math.cos(a)))
        k[r, q] = 1.0
    return k / k.sum()


def _screen(img, layer):
    layer = np.clip(layer, 0.0, 1.0)
    planes = _planes(img)
    out = 1.0 - (1.0 - planes) * (1.0 - layer[..., None])
    return out[..., 0] if img.ndim == 2 else out


def add_rain(img, density=0.002, length=21, angle=None, intensity=0.8, seed=0):
    """Seeded bright streaks: sparse drops smeared along one angle in [70, 110] degrees.

    ``angle`` is drawn from the seed when not given.
    """
    img = _as_float(img)
    if density < 0:
        raise ValueError("density must be >= 0")
    if density == 0:
        return img.copy()
    rng = np.random.default_rng(seed)
    if angle is None:
        angle = rng.uniform(70.0, 110.0)
    if not 70.0 <= angle <= 110.0:
        raise ValueError("rain angle must lie in [70, 110] degrees")
    h, w = img.shape[:2]
    drops = (rng.random((h, w)) < density) * rng.uniform(0.5, 1.0, (h, w))
    streaks = signal.fftconvolve(drops, _line_kernel(length, angle), mode="same")
    peak = streaks.max()
    if peak <= 0:
        return img.copy()
    return _screen(img, intensity * streaks / peak)


def add_snow(img, density=0.001, radius=2.0, intensity=0.9, seed=0):
    """Seeded Gaussian-profile bright flakes."""
    img = _as_float(img)
    if density < 0 or radius <= 0:
        raise ValueError("density must be >= 0 and radius > 0")
    if density == 0:
        return img.copy()
    rng = np.random.default_rng(seed)
    h, w = img.shape[:2]
    seeds = (rng.random((h, w)) < density) * rng.uniform(0.6, 1.0, (h, w))
    flakes = ndimage.gaussian_filter(seeds, radius, mode="nearest") * (2 * math.pi * radius**2)
    return _screen(img, intensity * flakes)


def disc_kernel(radius):
    r = int(math.ceil(radius))
    y, x = np.mgrid[-r : r + 1, -r : r + 1]
    k = (x**2 + y**2 <= radius**2).astype(np.float64)
    return k / k.sum()


def add_blur(img, radius=3.0):
    """Disc-kernel defocus, as from water on the lens."""
    img = _as_float(img)
    if radius < 0:
        raise ValueError("radius must be >= 0")
    if radius == 0:
        return img.copy()
    k = disc_kernel(radius)
    planes = _planes(img)
    out = np.stack([ndimage.convolve(planes[..., c], k, mode="nearest") for c in range(planes.shape[-1])], axis=-1)
    out = np.clip(out, 0.0, 1.0)
    return out[..., 0] if img.ndim == 2 else out


def apply_spec(img, spec):
    """Apply a :class:`DegradeSpec` to an image."""
    p = dict(spec.params)
    if spec.kind == "gaussian_noise":
        return add_gaussian_noise(img, p.get("sigma", 20.0), spec.seed)
    if spec.kind == "haze":
        t = p.get("t_field")
        if t is None:
            t = t_pattern(np.shape(img), p.get("t_pattern", "ramp"), p.get("t_value", 0.4))
        return synth_haze(img, t, p.get("A", 0.9))
    if spec.kind == "rain":
        return add_rain(
            img,
            p.get("density", 0.002),
            p.get("length", 21),
            p.get("angle"),
            p.get("intensity", 0.8),
            spec.seed,
        )
    if spec.kind == "snow":
        return add_snow(img, p.get("density", 0.001), p.get("radius", 2.0), p.get("intensity", 0.9), spec.seed)
    if spec.kind == "overexposure":
        return overexpose(img, p.get("gain", 2.0), p.get("gamma", 1.0))
    return add_blur(img, p.get("radius", 3.0))
