import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from dipf import imgcore as ic


class TestLuminance:
    def test_gray_input(self):
        y, _ = ic.to_luminance(np.full((4, 5, 3), 0.5))
        assert_allclose(y, 0.5, atol=1e-12)

    def test_pure_red(self):
        img = np.zeros((3, 3, 3))
        img[..., 0] = 1.0
        y, _ = ic.to_luminance(img)
        assert_allclose(y, 0.299, atol=1e-12)

    def test_round_trip_matches_matrix_oracle(self, rng):
        img = rng.random((20, 30, 3))
        y, chroma = ic.to_luminance(img)
        # oracle: explicit BT.601 YCbCr forward and inverse on each pixel
        fwd = np.array([[0.299, 0.587, 0.114], [-0.168736, -0.331264, 0.5], [0.5, -0.418688, -0.081312]])
        ycc = np.einsum("ij,hwj->hwi", fwd, img)
        assert_allclose(y, ycc[..., 0], atol=1e-12)
        back = np.einsum("ij,hwj->hwi", np.linalg.inv(fwd), ycc)
        out = ic.from_luminance(y, chroma)
        assert np.abs(out - back).max() < 1e-12
        assert np.abs(out - img).max() < 1.0 / 255

    def test_rejects_gray(self):
        with pytest.raises(ValueError):
            ic.to_luminance(np.zeros((4, 4)))


class TestMinFilters:
    def test_constant(self):
        assert_array_equal(ic.min_filter(np.full((9, 9), 0.3), 2), 0.3)

    def test_radius_zero_identity(self, rng):
        img = rng.random((8, 8))
        assert_array_equal(ic.min_filter(img, 0), img)

    def test_negative_radius(self):
        with pytest.raises(ValueError):
            ic.min_filter(np.zeros((4, 4)), -1)

    def test_single_dark_pixel(self):
        img = np.ones((9, 9))
        img[4, 4] = 0.1
        out = ic.min_filter(img, 1)
        expected = np.ones((9, 9))
        expected[3:6, 3:6] = 0.1
        assert_array_equal(out, expected)

    @pytest.mark.parametrize("radius", [1, 2, 3])
    def test_matches_brute_force_window_scan(self, rng, radius):
        img = rng.random((11, 13))
        pad = np.pad(img, radius, mode="edge")
        oracle = np.empty_like(img)
        for i in range(img.shape[0]):
            for j in range(img.shape[1]):
                oracle[i, j] = pad[i : i + 2 * radius + 1, j : j + 2 * radius + 1].min()
        assert_array_equal(ic.min_filter(img, radius), oracle)

    def test_min_channel_constant_colour(self):
        img = np.empty((5, 6, 3))
        img[...] = (0.2, 0.5, 0.7)
        assert_allclose(ic.min_channel(img), 0.2)

    def test_min_channel_gray_replicated(self, rng):
        g = rng.random((5, 6))
        assert_array_equal(ic.min_channel(ic.gray_to_rgb(g)), g)

    def test_min_channel_elementwise_oracle(self, rng):
        img = rng.random((7, 9, 3))
        oracle = np.array([[min(img[i, j]) for j in range(9)] for i in range(7)])
        assert_array_equal(ic.min_channel(img), oracle)


class TestSobel8:
    def test_constant_image(self):
        assert_allclose(ic.sobel_8dir(np.full((10, 10), 0.4)), 0.0, atol=1e-12)

    def test_kernels_zero_sum_and_rotation(self):
        for k in ic.SOBEL_8:
            assert k.sum() == 0
        # 90 degrees counter-clockwise is two 45-degree steps
        for k in range(8):
            assert_array_equal(ic.SOBEL_8[(k + 2) % 8], np.rot90(ic.SOBEL_8[k]))

    def test_vertical_step_edge(self):
        img = np.zeros((12, 12))
        img[:, 6:] = 1.0
        maps = ic.sobel_8dir(img)
        # direct 3x3 kernel application at the edge column
        patch = img[4:7, 4:7]
        assert maps[0][5, 5] == pytest.approx(abs((ic.SOBEL_8[0] * patch).sum()))
        assert maps[0][5, 5] == pytest.approx(4.0)
        assert maps[0].max() == maps[0][:, 5:7].max()
        assert_allclose(maps[2], 0.0, atol=1e-12)
        assert_allclose(maps[6], 0.0, atol=1e-12)

    def test_rotation_permutes_directions(self, rng):
        img = rng.random((15, 15))
        maps = ic.sobel_8dir(img)
        rotated = ic.sobel_8dir(np.rot90(img))
        for k in range(8):
            # rotate, filter, rotate back
            assert_allclose(np.rot90(rotated[(k + 2) % 8], -1), maps[k], atol=1e-12)


class TestNoiseLevel:
    def test_constant(self):
        assert ic.estimate_noise_level(np.full((64, 64), 0.5)) == 0.0

    def test_known_sigma(self, rng):
        img = 0.5 + rng.standard_normal((240, 320)) * 20 / 255
        est = ic.estimate_noise_level(img)
        assert abs(est - 20) <= 0.15 * 20

    @pytest.mark.parametrize(
        "img",
        [
            np.tile(np.linspace(0, 1, 320), (240, 1)),
            (np.indices((240, 320)).sum(axis=0) // 8 % 2).astype(float),
        ],
        ids=["ramp", "checker"],
    )
    def test_clean_images(self, img):
        assert ic.estimate_noise_level(img) < 3

    def test_scales_linearly_with_noise(self, rng):
        base = rng.standard_normal((128, 128))
        a = ic.estimate_noise_level(0.5 + base * 5 / 255)
        b = ic.estimate_noise_level(0.5 + base * 10 / 255)
        assert b == pytest.approx(2 * a, rel=1e-9)


class TestHistogramEntropy:
    def test_zero_image(self):
        assert ic.histogram_pmf(np.zeros((8, 8)))[0] == pytest.approx(1.0, abs=1e-9)

    def test_two_valued(self):
        img = np.zeros((8, 8))
        img[:, 4:] = 1.0
        p = ic.histogram_pmf(img)
        assert p[0] == pytest.approx(0.5, abs=1e-9)
        assert p[255] == pytest.approx(0.5, abs=1e-9)

    def test_matches_direct_count(self, rng):
        img = rng.random((30, 40))
        counts = np.zeros(256)
        for v in img.ravel():
            counts[min(int(v * 256), 255)] += 1
        assert_allclose(ic.histogram_pmf(img), counts / counts.sum(), atol=1e-9)
        assert ic.histogram_pmf(img).sum() == pytest.approx(1.0)

    @pytest.mark.parametrize(
        "p, expected",
        [
            (np.eye(1, 256, 0).ravel(), 0.0),
            (np.full(256, 1 / 256), 8.0),
            (np.r_[np.full(4, 0.25), np.zeros(252)], 2.0),
        ],
        ids=["point-mass", "uniform-256", "uniform-4"],
    )
    def test_entropy(self, p, expected):
        assert ic.entropy(p) == pytest.approx(expected, abs=1e-12)

    def test_total_variation(self):
        img = np.array([[0.0, 1.0], [1.0, 1.0]])
        assert ic.total_variation(img) == 2.0
        assert math.isclose(ic.total_variation(np.zeros((3, 3))), 0.0)
