"""Transmission map estimation and contextual regularisation.

The coarse map relates the dark channel of the hazy input to a modelled
dark channel of the clear scene through a single exponent ``beta``. The
model is evaluated on the 8-bit intensity scale, where the logarithm of
``minA - minI`` is positive, and mapped back to [0, 1] by dividing by 255.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy import fft as sp_fft

from ._validation import as_rgb, check_gray, check_same_shape
from .imgcore import dark_channel, min_channel

T_FLOOR = 0.05
DEFAULT_BETA = 1.2778
DARK_RADIUS = 7
ATMO_FRACTION = 0.001
ATMO_RANGE = (0.7, 1.0)
LOG_GUARD = 1e-3
BASE_GUARD = 1e-4
BETA_SEARCH = (0.1, 5.0)

# first-order differences: 4 axis-aligned, 4 diagonal (row, col offsets)
DIRECTIONS = ((0, 1), (0, -1), (1, 0), (-1, 0), (1, 1), (-1, -1), (1, -1), (-1, 1))


@dataclass(frozen=True)
class BetaParam:
    beta: float = DEFAULT_BETA
    identifiable: bool = True

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be > 0")


@dataclass(frozen=True)
class RegularizerConfig:
    lambda_scale: float = 1.5
    lambda_min: float = 1e-3
    sigma_cap: float = 10.0
    weight_sigma: float = 0.5
    rho_start: float = 1.0
    iterations: int = 8
    rho_factor: float = 2.0
    directions: tuple = DIRECTIONS
    safeguard: bool = True

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.rho_factor <= 1 or self.rho_start <= 0:
            raise ValueError("penalty schedule must be positive and strictly increasing")
        if self.lambda_scale <= 0 or self.lambda_min <= 0:
            raise ValueError("lambda must be > 0")

    def fidelity(self, sigma):
        """Data weight ``1.5 * exp(-sigma)`` with ``sigma`` on the 0-255 scale."""
        lam = self.lambda_scale * math.exp(-min(float(sigma), self.sigma_cap))
        return max(lam, self.lambda_min)


@dataclass
class RefineResult:
    t: np.ndarray
    lam: float
    objective: list = field(default_factory=list)


def estimate_atmo_light(vis, radius=DARK_RADIUS):
    """Dark-channel estimate of the atmospheric light minimum, clamped to [0.7, 1]."""
    vis = as_rgb(vis, "visible")
    mins = min_channel(vis)
    dark = dark_channel(vis, radius).ravel()
    n = max(1, int(round(ATMO_FRACTION * dark.size)))
    idx = np.argsort(-dark, kind="stable")[:n]
    value = float(mins.ravel()[idx].mean())
    return float(np.clip(value, *ATMO_RANGE))


def estimate_minJ(min_i, min_a, beta=DEFAULT_BETA):
    """Modelled clear-scene dark channel, ``ln(minA - minI)^-beta`` on the 0-255 scale.

    Monotone non-decreasing in ``min_i``; output clamped to [0, 1].
    """
    min_i = np.asarray(min_i, dtype=np.float64)
    if isinstance(beta, BetaParam):
        beta = beta.beta
    arg = np.maximum(255.0 * (min_a - min_i), 1.0 + LOG_GUARD)
    return np.clip(np.log(arg) ** (-beta), 0.0, 1.0)


def transmission_from_dark(min_i, min_j, min_a):
    """``(minA - minI) ** (minA / (minA - minJ))`` with guards, clamped to [0.05, 1]."""
    base = np.clip(min_a - np.asarray(min_i, dtype=np.float64), BASE_GUARD, 1.0)
    expo = min_a / np.clip(min_a - np.asarray(min_j, dtype=np.float64), BASE_GUARD, 1.0)
    return np.clip(base**expo, T_FLOOR, 1.0)


def coarse_transmission(vis, min_a=None, beta=DEFAULT_BETA, radius=DARK_RADIUS):
    vis = as_rgb(vis, "visible")
    if min_a is None:
        min_a = estimate_atmo_light(vis, radius)
    min_i = dark_channel(vis, radius)
    min_j = estimate_minJ(min_i, min_a, beta)
    return transmission_from_dark(min_i, min_j, min_a)


def _golden_section(f, lo, hi, tol=1e-5):
    invphi = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return (a + b) / 2


def fit_beta_from_dark(samples, bounds=BETA_SEARCH):
    """Least-squares exponent from ``(minI, minJ_observed, minA)`` samples."""
    samples = list(samples)
    if not samples:
        raise ValueError("fit_beta needs at least one sample")

    def sse(beta):
        return sum(float(((estimate_minJ(mi, ma, beta) - mj) ** 2).sum()) for mi, mj, ma in samples)

    # a flat objective carries no information about beta
    probe = [sse(b) for b in np.linspace(bounds[0], bounds[1], 9)]
    if max(probe) - min(probe) <= 1e-12 * max(1.0, max(probe)):
        return BetaParam((bounds[0] + bounds[1]) / 2, identifiable=False)
    return BetaParam(_golden_section(sse, *bounds))


def fit_beta(pairs, radius=DARK_RADIUS, bounds=BETA_SEARCH):
    """Fit the exponent of the clear-scene dark channel model on (hazy, clear) pairs."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError("fit_beta needs at least one (hazy, clear) pair")
    samples = []
    for k, (hazy, clear) in enumerate(pairs):
        hazy = as_rgb(hazy, f"hazy[{k}]")
        clear = as_rgb(clear, f"clear[{k}]")
        check_same_shape(hazy, clear, stage=f"fit_beta pair {k}")
        samples.append((dark_channel(hazy, radius), dark_channel(clear, radius), estimate_atmo_light(hazy, radius)))
    return fit_beta_from_dark(samples, bounds)


def _mirror(x):
    # even extension makes the periodic FFT model consistent at the borders
    top = np.concatenate([x, x[:, ::-1]], axis=1)
    return np.concatenate([top, top[::-1]], axis=0)


def _diff(x, off):
    return np.roll(x, (-off[0], -off[1]), axis=(0, 1)) - x


def _diff_t(u, off):
    return np.roll(u, off, axis=(0, 1)) - u


@numba.njit(cache=True, inline="always")
def _wrap(k, n):
    # offsets are at most one pixel
    if k >= n:
        return k - n
    if k < 0:
        return k + n
    return k


@numba.njit(cache=True)
def _shrink_adjoint(x, weights, offsets, thresh_scale, out):
    """``out = sum_j D_j' shrink(D_j x, W_j * thresh_scale)`` on the periodic grid."""
    h, w = x.shape
    out[:] = 0.0
    for j in range(offsets.shape[0]):
        di, dj = offsets[j, 0], offsets[j, 1]
        for i in range(h):
            ii = _wrap(i + di, h)
            for c in range(w):
                cc = _wrap(c + dj, w)
                v = x[ii, cc] - x[i, c]
                thr = weights[j, i, c] * thresh_scale
                if v > thr:
                    u = v - thr
                elif v < -thr:
                    u = v + thr
                else:
                    continue
                out[ii, cc] += u
                out[i, c] -= u


@numba.njit(cache=True)
def _weighted_tv(x, weights, offsets):
    h, w = x.shape
    total = 0.0
    for j in range(offsets.shape[0]):
        di, dj = offsets[j, 0], offsets[j, 1]
        for i in range(h):
            ii = _wrap(i + di, h)
            for c in range(w):
                total += weights[j, i, c] * abs(x[ii, _wrap(c + dj, w)] - x[i, c])
    return total


def direction_weights(guide, cfg=None):
    """``exp(-(D_j guide)^2 / (2 s^2))`` for every direction ``j``."""
    cfg = cfg or RegularizerConfig()
    return [np.exp(-_diff(guide, off) ** 2 / (2.0 * cfg.weight_sigma**2)) for off in cfg.directions]


def regularizer_objective(x, t, weights, lam, directions=DIRECTIONS):
    """``lam/2 ||x - t||^2 + sum_j ||W_j o D_j x||_1`` on the periodic domain."""
    data = 0.5 * lam * float(((x - t) ** 2).sum())
    offsets = np.array(directions, dtype=np.int64)
    return data + _weighted_tv(np.ascontiguousarray(x, dtype=np.float64), np.asarray(weights, dtype=np.float64), offsets)


def refine_transmission(t, sigma, guide=None, cfg=None, return_history=False):
    """Contextual regularisation of a transmission map by half-quadratic splitting.

    ``sigma`` is the noise level of the visible luminance on the 0-255
    scale; ``guide`` (the visible luminance) shapes the direction weights.
    Each outer iteration takes one shrinkage step and one exact FFT solve
    at a doubled penalty. With ``cfg.safeguard`` an iterate that would raise
    the objective is rejected; the plain splitting iterates are available by
    turning it off.
    """
    cfg = cfg or RegularizerConfig()
    t = check_gray(t, "transmission")
    guide = t if guide is None else check_gray(guide, "guide")
    check_same_shape(t, guide, stage="transmission refinement")
    lam = cfg.fidelity(sigma)
    h, w = t.shape

    if np.ptp(t) == 0:
        out = t.copy()
        res = RefineResult(out, lam, [0.0] * (cfg.iterations + 1))
        return res if return_history else out

    te = _mirror(t)
    weights = direction_weights(_mirror(guide), cfg)
    # |FFT of a unit difference|^2 = 2 - 2 cos(frequency . offset)
    wy = 2 * np.pi * sp_fft.fftfreq(te.shape[0])[:, None]
    wx = 2 * np.pi * sp_fft.rfftfreq(te.shape[1])[None, :]
    otf = sum(2.0 - 2.0 * np.cos(wy * di + wx * dj) for di, dj in cfg.directions)
    te_hat = sp_fft.rfft2(te)

    wstack = np.stack(weights)
    offsets = np.array(cfg.directions, dtype=np.int64)
    acc = np.empty_like(te)
    track = cfg.safeguard or return_history
    x = te.copy()
    obj = regularizer_objective(x, te, wstack, lam, cfg.directions) if track else None
    history = [obj]
    rho = cfg.rho_start
    for _ in range(cfg.iterations):
        _shrink_adjoint(x, wstack, offsets, 1.0 / rho, acc)
        rhs = lam * te_hat + rho * sp_fft.rfft2(acc)
        cand = sp_fft.irfft2(rhs / (lam + rho * otf), s=x.shape)
        cand_obj = regularizer_objective(cand, te, wstack, lam, cfg.directions) if track else None
        if not cfg.safeguard or cand_obj <= obj:
            x, obj = cand, cand_obj
        history.append(obj)
        rho *= cfg.rho_factor

    out = np.clip(x[:h, :w], T_FLOOR, 1.0)
    if return_history:
        return RefineResult(out, lam, history)
    return out
