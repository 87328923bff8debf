import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from dipf import DEFAULT_BETA, DIPFusion
from dipf.datasets import make_pair


def test_params_round_trip():
    est = DIPFusion(beta=1.1, eta=0.2)
    assert est.get_params()["eta"] == 0.2
    twin = clone(est)
    assert twin.get_params() == est.get_params()
    assert twin.set_params(gamma_mpc=2.0).gamma_mpc == 2.0


def test_fit_without_targets_keeps_beta():
    est = DIPFusion(beta=1.5).fit()
    assert est.beta_ == 1.5 and est.beta_identifiable_


def test_fit_recovers_beta():
    from scipy import ndimage

    from dipf.imgcore import gray_to_rgb
    from dipf.transmission import estimate_atmo_light, estimate_minJ

    hazy, clear = [], []
    for seed in range(2):
        h = gray_to_rgb(0.1 + 0.7 * ndimage.gaussian_filter(np.random.default_rng(seed).random((60, 60)), 3))
        # the model is non-decreasing, so it commutes with the dark-channel minimum
        hazy.append(h)
        clear.append(gray_to_rgb(estimate_minJ(h[..., 0], estimate_atmo_light(h), DEFAULT_BETA)))
    est = DIPFusion().fit(hazy, clear)
    assert est.beta_ == pytest.approx(DEFAULT_BETA, abs=0.01)


def test_fit_length_mismatch():
    with pytest.raises(ValueError):
        DIPFusion().fit([np.zeros((4, 4))], [])


def test_invalid_param_rejected_at_fit():
    with pytest.raises(ValueError):
        DIPFusion(eta=-1.0).fit()


def test_transform_requires_fit(small_pair):
    with pytest.raises(NotFittedError):
        DIPFusion().transform([small_pair])


def test_transform_and_score(small_pair):
    est = DIPFusion(fit_beta=False).fit()
    (fused,) = est.transform([small_pair])
    assert fused.shape == small_pair[0].shape
    assert len(est.diagnostics_) == 1
    np.testing.assert_array_equal(est.fuse(*small_pair), fused)
    assert 0.0 <= est.score([small_pair]) <= 1.0
