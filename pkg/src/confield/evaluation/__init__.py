"""Quantitative evaluation: metrics and protocols."""

from .metrics import icc, ms_ssim, psnr
from .protocols import (
    IccReport,
    QualityReport,
    decoupling_score,
    icc_protocol,
    interpolation_eval,
    normalized_track_from_csv,
    training_view_eval,
    transfer_expressions,
)

__all__ = [
    "IccReport",
    "QualityReport",
    "decoupling_score",
    "icc",
    "icc_protocol",
    "interpolation_eval",
    "ms_ssim",
    "normalized_track_from_csv",
    "psnr",
    "training_view_eval",
    "transfer_expressions",
]
