"""The four training loss terms.

Reconstruction and latent regularization pull the field toward the data;
the focal mask loss supervises region weights in image space (with density
treated as constant there), and the uncertainty-weighted attribute loss
teaches the attribute network while letting unreliable labels down-weight
themselves.
"""

from __future__ import annotations

import numpy as np

from ..autodiff import Tensor, as_tensor
from ..errors import ContractError, DimensionError, LabelError

MASK_OPACITY_EPS = 1e-5
PROB_FLOOR = 1e-7


def recon_loss(pred: Tensor, gt: np.ndarray) -> Tensor:
    """Sum of squared color errors over the ray batch."""
    if pred.shape != gt.shape:
        raise DimensionError(f"pred {pred.shape} vs gt {gt.shape}")
    diff = pred - as_tensor(gt.astype(pred.data.dtype))
    return (diff * diff).sum()


def latent_reg_loss(codes: list[Tensor]) -> Tensor:
    """Gaussian prior: sum of squared latent codes."""
    total = None
    for c in codes:
        term = (c * c).sum()
        total = term if total is None else total + term
    return total


def mask_loss(rendered_mask: Tensor, opacity: np.ndarray, labels: np.ndarray,
              gamma: float = 2.0) -> Tensor:
    """Focal classification loss on opacity-renormalized mask renders.

    `rendered_mask` must be composited with detached quadrature weights so
    no gradient reaches the density; `opacity` is the matching (constant)
    weight sum. Labels are region ids in 0..N (0 = background).
    """
    r, n_channels = rendered_mask.shape
    labels = np.asarray(labels)
    if labels.min() < 0 or labels.max() >= n_channels:
        raise LabelError(
            f"mask labels must lie in 0..{n_channels - 1}, got "
            f"[{labels.min()}, {labels.max()}]")
    denom = np.maximum(opacity, MASK_OPACITY_EPS).astype(rendered_mask.data.dtype)
    p = rendered_mask / as_tensor(denom.reshape(r, 1))
    p_true = p[np.arange(r), labels].clip(PROB_FLOOR, 1.0)
    log_p = p_true.log()
    if gamma == 0.0:
        return -log_p.sum()
    return -((1.0 - p_true) ** gamma * log_p).sum()


def attribute_loss(alpha_pred: Tensor, alpha_gt: np.ndarray, beta: Tensor,
                   delta: np.ndarray) -> Tensor:
    """Uncertainty-attenuated squared error on attribute values.

    Per labeled (frame, attribute): |a - a_gt|^2 / (2 b^2) + (log b)^2 / 2.
    Rows with delta=0 contribute exactly zero value and gradient.
    """
    if np.any(beta.data <= 0.0):
        raise ContractError("uncertainty beta must be positive")
    d = as_tensor(np.asarray(delta, dtype=alpha_pred.data.dtype))
    resid = alpha_pred - as_tensor(np.asarray(alpha_gt, dtype=alpha_pred.data.dtype))
    log_beta = beta.log()
    per_entry = (resid * resid) / (beta * beta * 2.0) + (log_beta * log_beta) * 0.5
    return (per_entry * d).sum()


def total_loss(recon: Tensor, reg: Tensor, mask: Tensor, attr: Tensor,
               w_reg: float, w_mask: float, w_attr: float) -> Tensor:
    return recon + reg * w_reg + mask * w_mask + attr * w_attr
