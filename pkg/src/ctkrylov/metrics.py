"""Reconstruction quality metrics: relative reconstruction error and SSIM."""

from __future__ import annotations

import numpy as np
from scipy.signal import fftconvolve


class UndefinedMetricError(ValueError):
    """The metric is undefined for the given reference image."""


def rre(x: np.ndarray, x_true: np.ndarray) -> float:
    """Relative reconstruction error ||x - x_true||_2 / ||x_true||_2."""
    x = np.asarray(x, dtype=np.float64).ravel()
    x_true = np.asarray(x_true, dtype=np.float64).ravel()
    if x.shape != x_true.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {x_true.shape}")
    denom = np.linalg.norm(x_true)
    if denom == 0.0:
        raise UndefinedMetricError("RRE is undefined for a zero ground truth")
    return float(np.linalg.norm(x - x_true) / denom)


def _gaussian_window(size: int = 8, sigma: float = 1.5) -> np.ndarray:
    ax = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(ax * ax) / (2.0 * sigma * sigma))
    w = np.outer(g, g)
    return w / w.sum()


def ssim(x: np.ndarray, x_true: np.ndarray, shape: tuple[int, int],
         dynamic_range: float | None = None) -> float:
    """Mean local structural similarity over 8x8 Gaussian windows, stride 1.

    Stabilization constants C1 = (0.01 L)^2, C2 = (0.03 L)^2 with the
    dynamic range L taken from x_true unless given explicitly. A constant
    ground truth (L == 0) leaves the metric undefined.
    """
    ny, nx = shape
    if ny < 8 or nx < 8:
        raise ValueError(f"SSIM needs at least 8x8 images, got {shape}")
    a = np.asarray(x, dtype=np.float64).reshape(shape)
    b = np.asarray(x_true, dtype=np.float64).reshape(shape)
    L = float(b.max() - b.min()) if dynamic_range is None else float(dynamic_range)
    if L == 0.0:
        raise UndefinedMetricError("SSIM is undefined for a constant ground truth")
    c1 = (0.01 * L) ** 2
    c2 = (0.03 * L) ** 2
    w = _gaussian_window()

    def filt(img):
        return fftconvolve(img, w[::-1, ::-1], mode="valid")

    mu_a = filt(a)
    mu_b = filt(b)
    mu_aa = filt(a * a) - mu_a * mu_a
    mu_bb = filt(b * b) - mu_b * mu_b
    mu_ab = filt(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * mu_ab + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (mu_aa + mu_bb + c2)
    return float(np.mean(num / den))
