"""PSNR and MS-SSIM, with TensorFlow's ssim_multiscale as the external reference."""

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lhic.errors import ShapeError
from lhic.metrics import MS_SSIM_WEIGHTS, QualityReport, available_scales, ms_ssim, psnr, quality_report
from lhic.synthetic import synthetic_image


def degrade(img, rng, sigma):
    return np.clip(img.astype(np.float64) + rng.normal(0, sigma, img.shape), 0, 255).astype(np.uint8)


class TestPSNR:
    def test_identical_is_inf(self, rng):
        img = rng.integers(0, 256, size=(5, 5, 3), dtype=np.uint8)
        assert psnr(img, img) == math.inf

    def test_unit_error_example(self):
        a = np.full((8, 8, 3), 100, np.uint8)
        assert psnr(a, a + 1) == pytest.approx(48.1308036086791, abs=1e-9)
        assert psnr(a, a + 1) == pytest.approx(20 * math.log10(255), abs=1e-12)

    def test_hand_computed(self):
        a = np.zeros((1, 2, 3), np.uint8)
        b = a.copy()
        b[0, 0, 0] = 6  # MSE = 36 / 6 = 6
        assert psnr(a, b) == pytest.approx(10 * math.log10(255**2 / 6), abs=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_symmetric(self, seed):
        r = np.random.default_rng(seed)
        a, b = (r.integers(0, 256, size=(6, 7, 3), dtype=np.uint8) for _ in range(2))
        assert psnr(a, b) == psnr(b, a)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            psnr(np.zeros((4, 4, 3), np.uint8), np.zeros((4, 5, 3), np.uint8))


class TestMSSSIM:
    def test_identical_is_one(self, rng):
        img = synthetic_image(rng, 180, 200)
        assert ms_ssim(img, img) == pytest.approx(1.0, abs=1e-12)

    def test_degradation_lowers_score(self, rng):
        img = synthetic_image(rng, 176, 176)
        mild, heavy = ms_ssim(img, degrade(img, rng, 5)), ms_ssim(img, degrade(img, rng, 30))
        assert 1.0 > mild > heavy > 0

    def test_symmetric(self, rng):
        img = synthetic_image(rng, 176, 190)
        other = degrade(img, rng, 12)
        assert ms_ssim(img, other) == pytest.approx(ms_ssim(other, img), abs=1e-12)

    def test_weights(self):
        assert MS_SSIM_WEIGHTS == (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)

    def test_scale_count(self):
        assert available_scales(176, 176) == 5
        assert available_scales(175, 400) == 5  # 175 -> 88 -> 44 -> 22 -> 11
        assert available_scales(160, 400) == 4  # fifth scale would be 10 px
        assert available_scales(11, 11) == 1
        assert available_scales(10, 100) == 0

    def test_small_image_warns_and_renormalizes(self, rng):
        img = synthetic_image(rng, 48, 48)
        with pytest.warns(UserWarning, match="3 of 5 scales"):
            v = ms_ssim(img, degrade(img, rng, 10))
        assert 0 < v < 1

    def test_too_small(self):
        with pytest.raises(ShapeError):
            ms_ssim(np.zeros((8, 8, 3), np.uint8), np.zeros((8, 8, 3), np.uint8))


@pytest.fixture(scope="module")
def tf():
    tf = pytest.importorskip("tensorflow")
    return tf


def tf_ms_ssim(tf, a, b):
    return float(tf.image.ssim_multiscale(a[None].astype(np.float32), b[None].astype(np.float32), max_val=255.0)[0])


def test_matches_tensorflow_reference(tf):
    r = np.random.default_rng(77)
    pairs = []
    for h, w, sigma in [(176, 176, 3), (180, 201, 8), (192, 256, 15), (177, 179, 25), (200, 176, 40)]:
        img = synthetic_image(r, h, w)
        pairs.append((img, degrade(img, r, sigma)))
    for a, b in pairs:
        assert abs(ms_ssim(a, b) - tf_ms_ssim(tf, a, b)) <= 1e-4


def test_quality_report(rng):
    img = synthetic_image(rng, 32, 32)
    rep = quality_report(img, img, 1.5)
    assert rep.psnr_db == math.inf and rep.bpp == 1.5
    assert json.loads(rep.to_json())["psnr_db"] == "inf"
    tiny = quality_report(img[:8, :8], img[:8, :8], 0.0)
    assert math.isnan(tiny.ms_ssim)
    assert isinstance(QualityReport(1.0, 0.5, 2.0).to_dict()["psnr_db"], float)
