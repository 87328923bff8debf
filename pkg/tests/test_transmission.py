import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from scipy import ndimage

from dipf import degrade as dg
from dipf import transmission as tm
from dipf.datasets import make_pair
from dipf.imgcore import gray_to_rgb, total_variation


class TestAtmosphericLight:
    def test_white(self):
        assert tm.estimate_atmo_light(np.ones((30, 30, 3))) == 1.0

    def test_black_hits_floor(self):
        assert tm.estimate_atmo_light(np.zeros((30, 30, 3))) == 0.7

    def test_synthetic_haze(self):
        vis, _ = make_pair(3, (240, 320))
        hazy = dg.synth_haze(vis, dg.t_pattern(vis.shape, "ramp"), A=0.9)
        assert abs(tm.estimate_atmo_light(hazy) - 0.9) <= 0.05


class TestMinJ:
    def test_guard_gives_maximal_constant(self):
        out = tm.estimate_minJ(np.full((5, 5), 0.8), 0.8)
        assert_array_equal(out, 1.0)

    def test_monotone(self, rng):
        mi = rng.random(500) * 0.9
        out = tm.estimate_minJ(mi, 0.9)
        order = np.argsort(mi)
        assert np.all(np.diff(out[order]) >= 0)

    def test_ramp_strictly_increasing(self):
        eps = 0.02
        ramp = np.linspace(0.0, 0.95 - eps, 256)
        out = tm.estimate_minJ(ramp, 0.95)
        assert np.all(np.diff(out) > 0)

    def test_value_on_byte_scale(self):
        # ln(255 * 0.5) ** -1.2778, evaluated by hand
        expected = math.log(127.5) ** -1.2778
        assert tm.estimate_minJ(np.array(0.5), 1.0) == pytest.approx(expected, rel=1e-12)

    def test_accepts_beta_param(self):
        a = tm.estimate_minJ(np.array([0.3]), 1.0, tm.BetaParam(2.0))
        b = tm.estimate_minJ(np.array([0.3]), 1.0, 2.0)
        assert_array_equal(a, b)


class TestTransmissionFromDark:
    def test_fully_transmissive(self):
        assert tm.transmission_from_dark(np.array(0.0), np.array(0.0), 1.0) == 1.0

    def test_interference_pixel_floor(self):
        assert tm.transmission_from_dark(np.array(0.9), np.array(0.2), 0.9) == tm.T_FLOOR

    def test_brighter_lowers_t_on_ramp(self):
        mi = np.linspace(0.0, 0.85, 200)
        t = tm.transmission_from_dark(mi, tm.estimate_minJ(mi, 0.9), 0.9)
        assert np.all(np.diff(t) <= 0)
        assert t[0] > t[-1]

    def test_range(self, small_pair):
        t = tm.coarse_transmission(small_pair[0])
        assert t.min() >= 0.05 and t.max() <= 1.0


class TestFitBeta:
    def test_default_constant(self):
        assert tm.DEFAULT_BETA == 1.2778
        assert tm.BetaParam().beta == 1.2778

    def test_inverse_crime_from_dark_channels(self, rng):
        samples = []
        for _ in range(3):
            mi = rng.random((20, 20)) * 0.8
            samples.append((mi, tm.estimate_minJ(mi, 0.9, 1.2778), 0.9))
        fitted = tm.fit_beta_from_dark(samples)
        assert fitted.identifiable
        assert abs(fitted.beta - 1.2778) <= 0.01

    def test_inverse_crime_on_images(self, rng):
        pairs = []
        for seed in range(2):
            hazy = gray_to_rgb(0.1 + 0.7 * ndimage.gaussian_filter(np.random.default_rng(seed).random((60, 60)), 3))
            a = tm.estimate_atmo_light(hazy)
            # the model is non-decreasing, so it commutes with the dark-channel minimum
            clear = gray_to_rgb(tm.estimate_minJ(hazy[..., 0], a, 1.2778))
            pairs.append((hazy, clear))
        fitted = tm.fit_beta(pairs)
        assert abs(fitted.beta - 1.2778) <= 0.01

    def test_flat_objective_returns_midpoint(self):
        # every beta maps minA - minI <= 1/255 to the same clamped value
        fitted = tm.fit_beta_from_dark([(np.array([[0.9]]), np.array([[1.0]]), 0.9)])
        assert not fitted.identifiable
        assert fitted.beta == pytest.approx(sum(tm.BETA_SEARCH) / 2)

    def test_empty(self):
        with pytest.raises(ValueError):
            tm.fit_beta([])

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            tm.BetaParam(0.0)


class TestRegularizer:
    def test_fidelity_weight(self):
        cfg = tm.RegularizerConfig()
        assert cfg.fidelity(0.0) == 1.5
        assert cfg.fidelity(2.0) == pytest.approx(1.5 * math.exp(-2))
        assert cfg.fidelity(500.0) == cfg.lambda_min

    def test_large_lambda_keeps_smooth_map(self):
        y, x = np.mgrid[0:64, 0:80]
        t = 0.3 + 0.5 * np.exp(-((x - 40) ** 2 + (y - 32) ** 2) / 800.0)
        cfg = tm.RegularizerConfig(lambda_scale=1e4)
        out = tm.refine_transmission(t, 0.0, cfg=cfg)
        assert np.sqrt(np.mean((out - t) ** 2)) < 1e-3

    def test_constant_is_fixed_point(self):
        t = np.full((20, 30), 0.42)
        assert_array_equal(tm.refine_transmission(t, 5.0), t)

    def test_salt_and_pepper_lowers_tv(self, rng):
        t = np.full((64, 64), 0.5)
        mask = rng.random(t.shape)
        t[mask < 0.05] = 0.05
        t[mask > 0.95] = 1.0
        out = tm.refine_transmission(t, 0.0)
        assert total_variation(out) < total_variation(t)

    def test_output_range(self, rng):
        out = tm.refine_transmission(rng.random((32, 32)), 3.0)
        assert out.min() >= 0.05 and out.max() <= 1.0

    @pytest.mark.parametrize("seed", range(3))
    def test_splitting_objective_non_increasing(self, seed):
        t = np.random.default_rng(seed).random((40, 48))
        cfg = tm.RegularizerConfig(safeguard=False)
        res = tm.refine_transmission(t, 2.0, cfg=cfg, return_history=True)
        assert len(res.objective) == cfg.iterations + 1
        assert np.all(np.diff(res.objective) <= 1e-6)

    def test_kernels_match_roll_reference(self, rng):
        x = rng.random((9, 11))
        w = rng.random((8, 9, 11))
        offsets = np.array(tm.DIRECTIONS)
        out = np.empty_like(x)
        tm._shrink_adjoint(x, w, offsets, 0.3, out)
        ref = np.zeros_like(x)
        for wj, off in zip(w, tm.DIRECTIONS):
            v = tm._diff(x, off)
            ref += tm._diff_t(np.sign(v) * np.maximum(np.abs(v) - 0.3 * wj, 0.0), off)
        assert_allclose(out, ref, atol=1e-14)
        tv = sum(float(np.abs(wj * tm._diff(x, off)).sum()) for wj, off in zip(w, tm.DIRECTIONS))
        assert tm._weighted_tv(x, w, offsets) == pytest.approx(tv, rel=1e-12)

    def test_adjoint_identity(self, rng):
        x, u = rng.random((7, 8)), rng.random((7, 8))
        for off in tm.DIRECTIONS:
            assert np.sum(tm._diff(x, off) * u) == pytest.approx(np.sum(x * tm._diff_t(u, off)))

    @pytest.mark.parametrize("kwargs", [{"iterations": 0}, {"rho_factor": 1.0}, {"lambda_scale": 0.0}])
    def test_config_validation(self, kwargs):
        with pytest.raises(ValueError):
            tm.RegularizerConfig(**kwargs)
