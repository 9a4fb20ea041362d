"""Image quality and agreement metrics: PSNR, MS-SSIM, ICC(3,1)."""

from __future__ import annotations

import logging

import numpy as np
from scipy.signal import convolve2d

log = logging.getLogger(__name__)

PSNR_CAP_DB = 99.0

MSSSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def psnr(img_a: np.ndarray, img_b: np.ndarray, peak: float = 1.0) -> float:
    """10 log10(peak^2 / MSE); identical inputs return the 99 dB cap."""
    a = np.asarray(img_a, dtype=np.float64)
    b = np.asarray(img_b, dtype=np.float64)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * np.log10(peak * peak / mse))


def _gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2.0
    k = np.exp(-(r ** 2) / (2.0 * sigma ** 2))
    k2 = np.outer(k, k)
    return k2 / k2.sum()


def _ssim_channel(a: np.ndarray, b: np.ndarray, peak: float) -> tuple[float, float]:
    """Mean SSIM and mean contrast-structure term for one grayscale image."""
    kernel = _gaussian_kernel(SSIM_WINDOW, SSIM_SIGMA)
    c1 = (SSIM_K1 * peak) ** 2
    c2 = (SSIM_K2 * peak) ** 2

    mu_a = convolve2d(a, kernel, mode="valid")
    mu_b = convolve2d(b, kernel, mode="valid")
    aa = convolve2d(a * a, kernel, mode="valid") - mu_a ** 2
    bb = convolve2d(b * b, kernel, mode="valid") - mu_b ** 2
    ab = convolve2d(a * b, kernel, mode="valid") - mu_a * mu_b

    cs = (2 * ab + c2) / (aa + bb + c2)
    ssim = ((2 * mu_a * mu_b + c1) / (mu_a ** 2 + mu_b ** 2 + c1)) * cs
    return float(ssim.mean()), float(cs.mean())


def _to_gray(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 3:
        return img.mean(axis=-1)
    return img


def _downsample(img: np.ndarray) -> np.ndarray:
    h, w = img.shape
    img = img[: h - h % 2, : w - w % 2]
    return 0.25 * (img[0::2, 0::2] + img[1::2, 0::2] + img[0::2, 1::2] + img[1::2, 1::2])


def ms_ssim(img_a: np.ndarray, img_b: np.ndarray, peak: float = 1.0) -> float:
    """Multi-scale SSIM with the standard 5-scale exponent weights.

    Images too small for five halvings use as many scales as fit (weights
    renormalized), with a warning.
    """
    a = _to_gray(img_a)
    b = _to_gray(img_b)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")

    max_scales = len(MSSSIM_WEIGHTS)
    scales = 0
    side = min(a.shape)
    while scales < max_scales and side >= SSIM_WINDOW:
        scales += 1
        side //= 2
    if scales == 0:
        raise ValueError(f"image smaller than the {SSIM_WINDOW}px SSIM window")
    if scales < max_scales:
        log.warning("image %s too small for %d scales; using %d",
                    a.shape, max_scales, scales)
    weights = np.asarray(MSSSIM_WEIGHTS[:scales])
    weights = weights / weights.sum()

    score = 1.0
    for s in range(scales):
        ssim, cs = _ssim_channel(a, b, peak)
        term = ssim if s == scales - 1 else cs
        score *= max(term, 1e-9) ** weights[s]
        if s != scales - 1:
            a = _downsample(a)
            b = _downsample(b)
    return float(score)


def icc(series_a, series_b) -> float:
    """ICC(3,1): two-way mixed, consistency, single rater.

    (BMS - EMS) / (BMS + (k-1) EMS) with k=2 raters. Zero variance in both
    series is defined as 0.
    """
    a = np.asarray(series_a, dtype=np.float64)
    b = np.asarray(series_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("icc expects two equal-length 1-D series")
    n = len(a)
    if n < 2:
        return 0.0
    x = np.stack([a, b], axis=1)
    k = 2
    grand = x.mean()
    row_means = x.mean(axis=1)
    col_means = x.mean(axis=0)
    ss_rows = k * np.sum((row_means - grand) ** 2)
    ss_cols = n * np.sum((col_means - grand) ** 2)
    ss_err = np.sum((x - grand) ** 2) - ss_rows - ss_cols
    bms = ss_rows / (n - 1)
    ems = ss_err / ((n - 1) * (k - 1))
    denom = bms + (k - 1) * ems
    if denom == 0.0:
        return 0.0
    return float((bms - ems) / denom)
