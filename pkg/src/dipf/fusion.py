"""High/low frequency fusion rules and the end-to-end fusion pipeline.

High bands: adaptive denoising, a K-L divergence gate that falls back to the
original band when denoising reshapes its histogram too much, and
monogenic phase consistency (MPC) saliency feeding a weighted sum.

Low bands: an energy layer (pointwise max of the contrast and infrared low
bands) blended with the structure low band using Gabor directional variance
and entropy.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import signal

from ._validation import StageError, as_gray, as_rgb, check_gray, check_same_shape
from .decompose import SanfParams, band_decompose, preprocess_infrared, sanf, split_contrast_structure
from .imgcore import (
    estimate_noise_level,
    from_luminance,
    histogram_pmf,
    image_entropy,
    to_luminance,
)
from .transmission import (
    DEFAULT_BETA,
    RegularizerConfig,
    coarse_transmission,
    estimate_atmo_light,
    refine_transmission,
)

LAYER_NAMES = ("CL", "SL", "IRp")
MPC_PAD_WAVELENGTHS = 2


@dataclass
class FusionConfig:
    eta: float = 0.1
    kl_threshold: float = 0.05
    delta_scale: float = 0.4
    delta_log_base: float = 5.0
    gamma_mpc: float = 1.5
    mpc_wavelengths: tuple = (4.0, 8.0, 16.0)
    mpc_sigma_onf: float = 0.55
    mpc_k: float = 2.0
    mpc_cutoff: float = 0.4
    mpc_gain: float = 10.0
    gabor_wavelength: float = 20.0
    gabor_aspect: float = 0.5
    gabor_phase: float = 0.0
    gabor_sigma: float = 11.2
    beta: float = DEFAULT_BETA
    blend_denoised: bool = False
    regularizer: RegularizerConfig = field(default_factory=RegularizerConfig)

    def __post_init__(self):
        for name in ("eta", "kl_threshold", "delta_scale", "gamma_mpc", "gabor_wavelength", "gabor_sigma", "beta"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.delta_log_base <= 1:
            raise ValueError("delta_log_base must be > 1")


@dataclass
class MpcMap:
    values: np.ndarray
    scales: int
    noise_threshold: float


@dataclass
class GaborBank:
    kernels: np.ndarray
    thetas: tuple
    wavelength: float
    aspect: float
    phase: float
    sigma: float


@dataclass
class LowFreqWeights:
    w2: float
    w4: float


# --- high-frequency path -------------------------------------------------


def denoise_strength(sigma, scale=0.4, base=5.0):
    """``0.4 * log5(sigma)``; None when ``sigma <= 1`` (no filtering)."""
    if sigma <= 1.0:
        return None
    return scale * math.log(sigma, base)


def adaptive_denoise_high(H, cfg=None, return_info=False):
    cfg = cfg or FusionConfig()
    H = check_gray(H, "high band")
    sigma = estimate_noise_level(H)
    delta = denoise_strength(sigma, cfg.delta_scale, cfg.delta_log_base)
    out = H.copy() if delta is None else sanf(H, SanfParams(kappa=delta, r=1, d=3))
    if return_info:
        return out, {"sigma": sigma, "delta": delta}
    return out


def kl_divergence(p, q):
    """``sum p ln(p/q)`` in nats, with ``0 ln 0 = 0``."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    mask = p > 0
    return float(max(0.0, np.sum(p[mask] * np.log(p[mask] / q[mask]))))


def band_kl(H, OH):
    """K-L divergence between the histograms of ``H`` and ``OH`` on their joint range."""
    lo = min(H.min(), OH.min())
    hi = max(H.max(), OH.max())
    if hi <= lo:
        return 0.0
    scale = 1.0 / (hi - lo)
    return kl_divergence(histogram_pmf((H - lo) * scale), histogram_pmf((OH - lo) * scale))


def detail_gate(H, OH, threshold=0.05, return_kl=False):
    """Return ``H`` itself when denoising moved its histogram by more than ``threshold``, else ``OH``."""
    check_same_shape(H, OH, stage="detail gate")
    kl = band_kl(np.asarray(H, dtype=np.float64), np.asarray(OH, dtype=np.float64))
    chosen = H if kl > threshold else OH
    if return_kl:
        return chosen, kl
    return chosen


def _log_gabor_bank(shape, wavelengths, sigma_onf):
    h, w = shape
    fy = np.fft.fftfreq(h)[:, None]
    fx = np.fft.fftfreq(w)[None, :]
    radius = np.hypot(fx, fy)
    radius[0, 0] = 1.0
    riesz1 = 1j * fx / radius
    riesz2 = 1j * fy / radius
    denom = 2.0 * math.log(sigma_onf) ** 2
    filters = []
    for wl in wavelengths:
        g = np.exp(-(np.log(radius * wl) ** 2) / denom)
        g[0, 0] = 0.0
        filters.append(g)
    return filters, riesz1, riesz2


def mpc(band, cfg=None):
    """Monogenic phase consistency of a band; non-negative, zero on flat input."""
    cfg = cfg or FusionConfig()
    band = check_gray(band, "band")
    nscale = len(cfg.mpc_wavelengths)
    if np.ptp(band) == 0:
        return MpcMap(np.zeros_like(band), nscale, 0.0)
    # replicate padding keeps the periodic FFT from wrapping one border onto the other
    pad = int(math.ceil(MPC_PAD_WAVELENGTHS * max(cfg.mpc_wavelengths)))
    h, w = band.shape
    padded = np.pad(band, pad, mode="edge")
    spec = np.fft.fft2(padded)
    filters, r1, r2 = _log_gabor_bank(padded.shape, cfg.mpc_wavelengths, cfg.mpc_sigma_onf)
    sum_even = np.zeros(padded.shape)
    sum_o1 = np.zeros(padded.shape)
    sum_o2 = np.zeros(padded.shape)
    amp_sum = np.zeros(padded.shape)
    amp_max = np.zeros(padded.shape)
    tau = 0.0
    for s, g in enumerate(filters):
        fs = spec * g
        even = np.real(np.fft.ifft2(fs))
        o1 = np.real(np.fft.ifft2(fs * r1))
        o2 = np.real(np.fft.ifft2(fs * r2))
        amp = np.sqrt(even**2 + o1**2 + o2**2)
        if s == 0:
            tau = float(np.median(amp[pad : pad + h, pad : pad + w]))
        sum_even += even
        sum_o1 += o1
        sum_o2 += o2
        amp_sum += amp
        amp_max = np.maximum(amp_max, amp)
    energy = np.sqrt(sum_even**2 + sum_o1**2 + sum_o2**2)

    # noise threshold scaled from the finest scale to the whole bank
    ratio = cfg.mpc_wavelengths[0] / cfg.mpc_wavelengths[1] if nscale > 1 else 0.0
    scale_sum = (1.0 - ratio**nscale) / (1.0 - ratio) if nscale > 1 else 1.0
    T = cfg.mpc_k * tau * scale_sum

    spread = amp_sum / (amp_max + 1e-12) / nscale
    weight = 1.0 / (1.0 + np.exp(cfg.mpc_gain * (cfg.mpc_cutoff - spread)))
    with np.errstate(divide="ignore", invalid="ignore"):
        cos_phase = np.where(amp_sum > 0, energy / amp_sum, 0.0)
    deviation = np.arccos(np.clip(cos_phase, 0.0, 1.0))
    values = (
        weight
        * np.maximum(1.0 - cfg.gamma_mpc * deviation, 0.0)
        * np.maximum(energy - T, 0.0)
        / (amp_sum + 1e-4)
    )
    return MpcMap(values[pad : pad + h, pad : pad + w].copy(), nscale, T)


def fuse_high(H, MH, eta=0.1):
    """Saliency-weighted sum of high bands; denominator is a single scalar."""
    H = [np.asarray(h, dtype=np.float64) for h in H]
    M = [np.asarray(m.values if isinstance(m, MpcMap) else m, dtype=np.float64) for m in MH]
    check_same_shape(*H, *M, stage="high-frequency fusion")
    denom = float(np.max(np.sum(M, axis=0))) + eta
    return sum((m + eta) / denom * h for m, h in zip(M, H))


# --- low-frequency path --------------------------------------------------


def energy_layer(L1, L3):
    """``L1`` where it is strictly brighter than ``L3``, else ``L3``."""
    L1 = np.asarray(L1, dtype=np.float64)
    L3 = np.asarray(L3, dtype=np.float64)
    check_same_shape(L1, L3, stage="energy layer")
    return np.where(L1 > L3, L1, L3)


def gabor_bank(sigma=11.2, wavelength=20.0, aspect=0.5, phase=0.0, thetas=(0.0, 45.0, 90.0, 135.0)):
    """Real Gabor kernels, mean-subtracted, of odd size ``round(6 sigma + 1)``."""
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    size = int(round(6 * sigma + 1))
    size += 1 - size % 2
    c = size // 2
    y, x = np.mgrid[-c : c + 1, -c : c + 1].astype(np.float64)
    kernels = []
    for theta in thetas:
        th = math.radians(theta)
        ct, st = math.cos(th), math.sin(th)
        # exact zeros for axis-aligned angles keep the transpose symmetry exact
        ct = 0.0 if abs(ct) < 1e-12 else ct
        st = 0.0 if abs(st) < 1e-12 else st
        xr = x * ct + y * st
        yr = -x * st + y * ct
        g = np.exp(-(xr**2 + aspect**2 * yr**2) / (2 * sigma**2)) * np.cos(2 * math.pi * xr / wavelength + phase)
        kernels.append(g - g.mean())
    return GaborBank(np.stack(kernels), tuple(thetas), wavelength, aspect, phase, sigma)


def gabor_responses(L, bank):
    L = np.asarray(L, dtype=np.float64)
    c = bank.kernels.shape[-1] // 2
    padded = np.pad(L, c, mode="edge")
    return np.stack([signal.fftconvolve(padded, k, mode="valid") for k in bank.kernels])


def directional_variance(L, bank):
    """Global variance of each Gabor response (one scalar per orientation)."""
    L = check_gray(L)
    if np.ptp(L) == 0:
        return np.zeros(len(bank.kernels))
    return gabor_responses(L, bank).var(axis=(1, 2))


def lowfreq_weights(L2, L4, bank):
    """Entropy-scaled directional-variance weights for the two low bands."""
    v2 = float(directional_variance(L2, bank).mean())
    v4 = float(directional_variance(L4, bank).mean())
    s2 = v2 * math.exp(image_entropy(L2))
    s4 = v4 * math.exp(image_entropy(L4))
    total = s2 + s4
    if total < 1e-15:
        return LowFreqWeights(0.5, 0.5)
    w2 = s2 / total
    return LowFreqWeights(w2, 1.0 - w2)


def fuse_low(L2, L4, weights):
    return weights.w2 * np.asarray(L2, dtype=np.float64) + weights.w4 * np.asarray(L4, dtype=np.float64)


def reconstruct(FH, FL):
    """``F = FH + FL``, unclamped; clamping happens at encode time."""
    check_same_shape(FH, FL, stage="reconstruction")
    return np.asarray(FH, dtype=np.float64) + np.asarray(FL, dtype=np.float64)


# --- pipeline -----------------------------------------------------------


@dataclass
class FusionResult:
    fused: np.ndarray
    luminance: np.ndarray
    diagnostics: dict
    intermediates: dict


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except ValueError as exc:
        raise StageError(name, str(exc)) from exc


def fuse_pipeline(vis, ir, cfg=None, keep_intermediates=False):
    """Fuse a co-registered visible/infrared pair.

    ``vis`` may be RGB or gray, ``ir`` is converted to gray. Returns a
    :class:`FusionResult` whose ``fused`` image has the layout of ``vis``.
    """
    cfg = cfg or FusionConfig()
    vis_arr = np.asarray(vis, dtype=np.float64)
    color = vis_arr.ndim == 3
    vis_rgb = _stage("visible input", as_rgb, vis_arr, "visible")
    ir = _stage("infrared input", as_gray, ir, "infrared")
    if vis_rgb.shape[:2] != ir.shape:
        raise StageError(
            "co-registration",
            f"visible {vis_rgb.shape[:2]} and infrared {ir.shape} sizes differ",
        )

    diag = {"config": _config_dict(cfg)}
    inter = {}

    vis_lum, chroma = to_luminance(vis_rgb)
    min_a = estimate_atmo_light(vis_rgb)
    t_coarse = coarse_transmission(vis_rgb, min_a, cfg.beta)
    sigma_vis = estimate_noise_level(vis_lum)
    refined = refine_transmission(t_coarse, sigma_vis, vis_lum, cfg.regularizer, return_history=True)
    t = refined.t
    diag["transmission"] = {
        "minA": min_a,
        "beta": cfg.beta,
        "sigma_vis": sigma_vis,
        "lambda": refined.lam,
        "objective": refined.objective,
    }

    CL, SL = split_contrast_structure(vis_lum, t)
    IRp, ir_info = preprocess_infrared(ir, return_info=True)
    diag["infrared"] = ir_info

    layers = (CL, SL, IRp)
    lows, highs, band_info = [], [], []
    for layer in layers:
        lo, hi, info = band_decompose(layer, return_info=True)
        lows.append(lo)
        highs.append(hi)
        band_info.append(info)
    diag["bands"] = dict(zip(LAYER_NAMES, band_info))

    OH, FOH, MH, high_info = [], [], [], []
    for H in highs:
        oh, dn = adaptive_denoise_high(H, cfg, return_info=True)
        foh, kl = detail_gate(H, oh, cfg.kl_threshold, return_kl=True)
        m = mpc(foh, cfg)
        OH.append(oh)
        FOH.append(foh)
        MH.append(m)
        high_info.append(
            {
                "sigma_h": dn["sigma"],
                "delta": dn["delta"],
                "denoised": dn["delta"] is not None,
                "kl": kl,
                "gate": "H kept" if foh is H else "OH kept",
                "mpc_threshold": m.noise_threshold,
                "mpc_max": float(m.values.max()),
            }
        )
    blend = FOH if cfg.blend_denoised else highs
    FH = fuse_high(blend, MH, cfg.eta)
    denom = float(np.max(np.sum([m.values for m in MH], axis=0))) + cfg.eta
    gain = np.sum([(m.values + cfg.eta) / denom for m in MH], axis=0)
    diag["high"] = {
        **dict(zip(LAYER_NAMES, high_info)),
        "blend": "FOH" if cfg.blend_denoised else "H",
        "effective_gain_mean": float(gain.mean()),
        "effective_gain_max": float(gain.max()),
    }

    L4 = energy_layer(lows[0], lows[2])
    bank = gabor_bank(cfg.gabor_sigma, cfg.gabor_wavelength, cfg.gabor_aspect, cfg.gabor_phase)
    weights = lowfreq_weights(lows[1], L4, bank)
    FL = fuse_low(lows[1], L4, weights)
    diag["low"] = {"w2": weights.w2, "w4": weights.w4}

    F = reconstruct(FH, FL)
    fused = from_luminance(np.clip(F, 0.0, 1.0), chroma) if color else np.clip(F, 0.0, 1.0)

    if keep_intermediates:
        inter.update(
            t_coarse=t_coarse,
            t_refined=t,
            CL=CL,
            SL=SL,
            IRp=IRp,
            L=lows,
            H=highs,
            OH=OH,
            FOH=FOH,
            MH=[m.values for m in MH],
            L4=L4,
            FH=FH,
            FL=FL,
            F=F,
        )
    return FusionResult(fused, F, diag, inter)


def _config_dict(cfg):
    d = asdict(cfg)
    d["regularizer"]["directions"] = [list(o) for o in cfg.regularizer.directions]
    d["mpc_wavelengths"] = list(cfg.mpc_wavelengths)
    return d
