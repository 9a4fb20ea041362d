"""Differentiable volume rendering quadrature.

Piecewise-constant integration: alpha_k = 1 - exp(-sigma_k * delta_k),
transmittance T_k = exp(-sum_{j<k} sigma_j delta_j) (identically
prod_{j<k}(1 - alpha_j)), per-sample weight w_k = T_k * alpha_k. Color, mask
channels, and expected depth all reuse the same weights.
"""

from __future__ import annotations

import numpy as np

from ..autodiff import Tensor, as_tensor
from ..errors import DimensionError

OPACITY_FLOOR = 1e-6


def sample_depths(near: float, far: float, n_rays: int, count: int,
                  stratified: bool, rng: np.random.Generator | None = None,
                  dtype=np.float32) -> np.ndarray:
    """Depths along each ray, shape (n_rays, count).

    Non-stratified: inclusive linspace over [near, far]. Stratified: one
    uniform draw inside each of `count` equal bins, so sample k always lies
    in bin k.
    """
    if count < 2:
        raise DimensionError(f"need at least 2 samples per ray, got {count}")
    if stratified:
        if rng is None:
            raise DimensionError("stratified sampling needs an rng")
        u = rng.random((n_rays, count), dtype=np.float64)
        k = np.arange(count)[None, :]
        t = near + (k + u) * (far - near) / count
    else:
        t = np.broadcast_to(np.linspace(near, far, count), (n_rays, count))
    return np.ascontiguousarray(t, dtype=dtype)


def interval_lengths(depths: np.ndarray, far: float) -> np.ndarray:
    """delta_k = t_{k+1} - t_k, with the last interval running to `far`."""
    deltas = np.empty_like(depths)
    deltas[:, :-1] = depths[:, 1:] - depths[:, :-1]
    deltas[:, -1] = far - depths[:, -1]
    return np.maximum(deltas, 0.0)


def quadrature_weights(sigma: Tensor, deltas: np.ndarray) -> tuple[Tensor, Tensor]:
    """Per-sample compositing weights and transmittance.

    `sigma` is (R, S); returns (weights (R, S), transmittance (R, S)).
    """
    tau = sigma * as_tensor(deltas.astype(sigma.data.dtype))
    inclusive = tau.cumsum(axis=1)
    transmittance = (inclusive - tau) * -1.0
    transmittance = transmittance.exp()
    alpha = 1.0 - (tau * -1.0).exp()
    return transmittance * alpha, transmittance


def composite_color(weights: Tensor, colors: Tensor, depths: np.ndarray,
                    background: np.ndarray | None = None
                    ) -> tuple[Tensor, Tensor, Tensor]:
    """Composite sample colors into pixels.

    Returns (rgb (R, 3), opacity (R,), expected depth (R,)). Depth is the
    opacity-normalized weighted depth with a small floor against empty rays.
    `background` (3,) is blended in with weight 1 - opacity when given.
    """
    r, s = weights.shape
    if colors.shape != (r, s, 3):
        raise DimensionError(f"colors shape {colors.shape} != {(r, s, 3)}")
    w3 = weights.reshape(r, s, 1)
    rgb = (w3 * colors).sum(axis=1)
    opacity = weights.sum(axis=1)
    depth_num = (weights * as_tensor(depths.astype(weights.data.dtype))).sum(axis=1)
    depth = depth_num / opacity.clip(OPACITY_FLOOR, None)
    if background is not None:
        bg = as_tensor(np.asarray(background, dtype=weights.data.dtype).reshape(1, 3))
        rgb = rgb + (1.0 - opacity).reshape(r, 1) * bg
    return rgb, opacity, depth


def composite_mask(weights: Tensor, masks: Tensor) -> Tensor:
    """Render mask channels with the same quadrature weights as color.

    `masks` is (R, S, C); returns (R, C). The channel sum equals the
    accumulated opacity because the per-point channels sum to one.
    """
    r, s = weights.shape
    if masks.shape[:2] != (r, s):
        raise DimensionError(f"masks shape {masks.shape} incompatible with weights {(r, s)}")
    return (weights.reshape(r, s, 1) * masks).sum(axis=1)
