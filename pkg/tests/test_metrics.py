import math

import numpy as np
import pytest

from utils.error_middleware import DimensionError, ParameterError
from utils.metrics import evaluate, psnr, ssim


@pytest.mark.unit
class TestPsnr:
    """Relação sinal-ruído de pico"""

    def test_identical_is_infinite(self, rng):
        x = rng.uniform(size=(4, 4, 3))
        assert psnr(x, x) == math.inf

    def test_half_gray_against_black(self):
        assert psnr(np.zeros((4, 4, 1)), np.full((4, 4, 1), 0.5)) == pytest.approx(6.0206, abs=1e-3)

    def test_scale_invariance(self, rng):
        x, y = rng.uniform(size=(8, 8, 3)), rng.uniform(size=(8, 8, 3))
        assert psnr(255 * x, 255 * y, peak=255.0) == pytest.approx(psnr(x, y), abs=1e-9)

    def test_symmetry(self, rng):
        x, y = rng.uniform(size=(8, 8, 3)), rng.uniform(size=(8, 8, 3))
        assert psnr(x, y) == psnr(y, x)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            psnr(np.zeros((4, 4, 3)), np.zeros((4, 4, 1)))

    def test_invalid_peak(self):
        with pytest.raises(ParameterError):
            psnr(np.zeros((2, 2)), np.ones((2, 2)), peak=0.0)


@pytest.mark.unit
class TestSsim:
    """Índice de similaridade estrutural"""

    def test_identical_is_one(self, rng):
        x = rng.uniform(size=(16, 16, 3))
        assert ssim(x, x) == 1.0

    def test_constant_images_luminance_only(self):
        x = np.full((16, 16, 1), 0.5)
        y = np.full((16, 16, 1), 0.25)
        assert ssim(x, y) == pytest.approx(0.8004, abs=1e-3)

    def test_symmetry_and_range(self, rng):
        x, y = rng.uniform(size=(16, 16, 3)), rng.uniform(size=(16, 16, 3))
        value = ssim(x, y)
        assert value == pytest.approx(ssim(y, x), abs=1e-12)
        assert -1.0 <= value <= 1.0

    def test_too_small(self):
        with pytest.raises(ParameterError):
            ssim(np.zeros((10, 16, 1)), np.ones((10, 16, 1)))


@pytest.mark.unit
class TestEvaluate:
    """Relatório de métricas"""

    def test_report_and_row(self, rng):
        x = rng.uniform(size=(16, 16, 3))
        y = np.clip(x + 0.01 * rng.standard_normal(x.shape), 0, 1)
        report = evaluate(x, y)
        assert report.psnr_db == pytest.approx(psnr(x, y))
        assert report.ssim == pytest.approx(ssim(x, y))
        assert report.per_channel == []
        assert report.as_row("a.png") == {"file": "a.png", "psnr_db": report.psnr_db, "ssim": report.ssim}

    def test_per_channel(self, rng):
        x = rng.uniform(size=(16, 16, 3))
        report = evaluate(x, x * 0.9, per_channel=True)
        assert len(report.per_channel) == 3
        assert all(np.isfinite(p) for p, _ in report.per_channel)
