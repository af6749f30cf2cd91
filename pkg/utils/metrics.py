"""
Métricas de qualidade de imagem: PSNR e SSIM.

As imagens são tensores em [0, 1] e o pico padrão é 1.0. PSNR infinito
(imagens idênticas) é serializado como "inf" nos CSVs.
"""

from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np
from skimage.metrics import structural_similarity

from utils.error_middleware import DimensionError, ParameterError
from utils.tensor_core import as_tensor3

# Janela gaussiana 11 x 11 com sigma 1.5
SSIM_SIGMA = 1.5
SSIM_MIN_SIDE = 11


@dataclass(frozen=True)
class MetricReport:
    psnr_db: float
    ssim: float
    per_channel: List[Tuple[float, float]] = field(default_factory=list)

    def as_row(self, file: str) -> dict:
        return {"file": file, "psnr_db": self.psnr_db, "ssim": self.ssim}


def _pair(x, y):
    x, y = as_tensor3(x, "x"), as_tensor3(y, "y")
    if x.shape != y.shape:
        raise DimensionError(f"dimensões diferentes: {x.shape} e {y.shape}")
    return x, y


def psnr(x, y, peak: float = 1.0) -> float:
    """10·log10(peak² / MSE); +inf quando MSE = 0."""
    if peak <= 0:
        raise ParameterError(f"peak deve ser positivo, recebeu {peak}")
    x, y = _pair(x, y)
    mse = float(np.mean((x - y) ** 2))
    if mse == 0.0:
        return float("inf")
    return float(10.0 * np.log10(peak ** 2 / mse))


def ssim(x, y, peak: float = 1.0) -> float:
    """SSIM médio (janela gaussiana 11x11, sigma 1.5, constantes de Wang et al.) entre canais."""
    if peak <= 0:
        raise ParameterError(f"peak deve ser positivo, recebeu {peak}")
    x, y = _pair(x, y)
    if min(x.shape[:2]) < SSIM_MIN_SIDE:
        raise ParameterError(f"SSIM requer H, W >= {SSIM_MIN_SIDE}, recebeu {x.shape[:2]}")
    if np.array_equal(x, y):
        return 1.0
    value = structural_similarity(x, y, data_range=peak, channel_axis=2,
                                  gaussian_weights=True, sigma=SSIM_SIGMA,
                                  use_sample_covariance=False, K1=0.01, K2=0.03)
    return float(np.clip(value, -1.0, 1.0))


def evaluate(reference, reconstruction, peak: float = 1.0, per_channel: bool = False) -> MetricReport:
    """PSNR e SSIM de uma reconstrução; opcionalmente por canal."""
    x, y = _pair(reference, reconstruction)
    channels = []
    if per_channel:
        for c in range(x.shape[2]):
            channels.append((psnr(x[:, :, c], y[:, :, c], peak), ssim(x[:, :, c], y[:, :, c], peak)))
    return MetricReport(psnr_db=psnr(x, y, peak), ssim=ssim(x, y, peak), per_channel=channels)
