"""Objective fusion-quality metrics.

All metrics take two source images ``a``, ``b`` and a fused image ``f`` in
[0, 1] and are symmetric in the sources.

- ``q_mi``: normalized mutual information (each term divided by the
  mean source/fused entropy), range [0, 2].
- ``q_ncie``: nonlinear correlation information entropy from the 3x3
  matrix of normalized mutual informations, range [0, 1].
- ``q_g``: gradient-based edge transfer (Sobel strength and orientation,
  sigmoid preservation model), range [0, 1].
- ``q_m``: the same edge-preservation model on the detail bands of a
  two-level dyadic Haar split, summed with weights given by each level's
  source edge energy relative to the finest level. Not bounded by 1.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import ndimage

from ._validation import as_gray, check_same_shape

BINS = 256

# edge-preservation sigmoid: (gain, slope, midpoint) for strength and orientation
STRENGTH_SIGMOID = (0.9994, -15.0, 0.5)
ORIENT_SIGMOID = (0.9879, -22.0, 0.8)

_SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
_SOBEL_Y = _SOBEL_X.T


@dataclass
class QualityReport:
    pair_id: str
    q_mi: float
    q_ncie: float
    q_g: float
    q_m: float

    def as_row(self):
        return asdict(self)


def _prep(a, b, f):
    a, b, f = (as_gray(x, n) for x, n in ((a, "a"), (b, "b"), (f, "f")))
    check_same_shape(a, b, f, stage="metric inputs")
    return a, b, f


def _quantize(img):
    return np.clip(np.floor(np.clip(img, 0.0, 1.0) * BINS), 0, BINS - 1).astype(np.int64).ravel()


def _entropy_bits(p):
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


def _mi_terms(x, y):
    """``(I(x;y), H(x), H(y))`` in bits from a 256x256 joint histogram."""
    qx, qy = _quantize(x), _quantize(y)
    joint = np.bincount(qx * BINS + qy, minlength=BINS * BINS).reshape(BINS, BINS)
    pxy = joint / joint.sum()
    px = pxy.sum(axis=1)
    py = pxy.sum(axis=0)
    hx, hy = _entropy_bits(px), _entropy_bits(py)
    mi = max(0.0, hx + hy - _entropy_bits(pxy.ravel()))
    return mi, hx, hy


def _normalized_mi(x, y):
    mi, hx, hy = _mi_terms(x, y)
    if hx + hy <= 0:
        return 0.0
    return 2.0 * mi / (hx + hy)


def q_mi(a, b, f):
    a, b, f = _prep(a, b, f)
    return _normalized_mi(a, f) + _normalized_mi(b, f)


def q_ncie(a, b, f):
    a, b, f = _prep(a, b, f)
    imgs = (a, b, f)
    R = np.eye(3)
    for i in range(3):
        for j in range(i + 1, 3):
            R[i, j] = R[j, i] = _normalized_mi(imgs[i], imgs[j])
    lam = np.clip(np.linalg.eigvalsh(R), 0.0, None) / 3.0
    lam = lam[lam > 0]
    he = -float(np.sum(lam * np.log(lam) / math.log(BINS)))
    return float(np.clip(1.0 - he, 0.0, 1.0))


def _sigmoid(x, params):
    gain, slope, mid = params
    # normalised so that perfect preservation (x = 1) scores 1
    return np.minimum((1.0 / (1.0 + np.exp(slope * (x - mid)))) / gain, 1.0)


def _strength_orientation(gx, gy):
    g = np.hypot(gx, gy)
    with np.errstate(divide="ignore", invalid="ignore"):
        alpha = np.where(gx == 0, np.where(gy == 0, 0.0, math.pi / 2), np.arctan(gy / np.where(gx == 0, 1.0, gx)))
    return g, alpha


def _preservation(gs, als, gf, alf):
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(gs > gf, gf / np.where(gs == 0, 1.0, gs), gs / np.where(gf == 0, 1.0, gf))
    ratio = np.where((gs == 0) & (gf == 0), 1.0, ratio)
    orient = 1.0 - np.abs(als - alf) / (math.pi / 2)
    return _sigmoid(ratio, STRENGTH_SIGMOID) * _sigmoid(orient, ORIENT_SIGMOID)


def _edge_transfer(grads_a, grads_b, grads_f):
    """Weighted edge preservation and the total source edge strength."""
    ga, aa = _strength_orientation(*grads_a)
    gb, ab = _strength_orientation(*grads_b)
    gf, af = _strength_orientation(*grads_f)
    qa = _preservation(ga, aa, gf, af)
    qb = _preservation(gb, ab, gf, af)
    total = float((ga + gb).sum())
    if total <= 0:
        return 0.0, 0.0
    return float((qa * ga + qb * gb).sum()) / total, total


def _sobel(img):
    return (
        ndimage.correlate(img, _SOBEL_X, mode="nearest"),
        ndimage.correlate(img, _SOBEL_Y, mode="nearest"),
    )


def q_g(a, b, f):
    a, b, f = _prep(a, b, f)
    score, _ = _edge_transfer(_sobel(a), _sobel(b), _sobel(f))
    return float(np.clip(score, 0.0, 1.0))


def _haar_level(img):
    """One level of the 2-D Haar transform: (approximation, horizontal, vertical)."""
    p00, p01 = img[0::2, 0::2], img[0::2, 1::2]
    p10, p11 = img[1::2, 0::2], img[1::2, 1::2]
    approx = (p00 + p01 + p10 + p11) / 2.0
    # detail along x (column changes) and along y (row changes)
    dx = (p01 + p11 - p00 - p10) / 2.0
    dy = (p10 + p11 - p00 - p01) / 2.0
    return approx, dx, dy


def _pad_to(img, multiple):
    h, w = img.shape
    ph, pw = (-h) % multiple, (-w) % multiple
    if ph or pw:
        img = np.pad(img, ((0, ph), (0, pw)), mode="edge")
    return img


def q_m(a, b, f, levels=2):
    a, b, f = _prep(a, b, f)
    imgs = [_pad_to(x, 2**levels) for x in (a, b, f)]
    scores, energies = [], []
    for _ in range(levels):
        split = [_haar_level(x) for x in imgs]
        score, energy = _edge_transfer(split[0][1:], split[1][1:], split[2][1:])
        scores.append(score)
        energies.append(energy)
        imgs = [s[0] for s in split]
    if energies[0] <= 0:
        return 0.0
    return float(sum(s * e / energies[0] for s, e in zip(scores, energies)))


def evaluate(a, b, f, pair_id=""):
    return QualityReport(pair_id, q_mi(a, b, f), q_ncie(a, b, f), q_g(a, b, f), q_m(a, b, f))
