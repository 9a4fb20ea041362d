"""Full-image rendering and PNG I/O."""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np
from PIL import Image

from ..autodiff import as_tensor, no_grad
from ..field.model import Field
from .camera import CameraModel, generate_rays, pixel_grid
from .integrate import (
    composite_color,
    composite_mask,
    interval_lengths,
    quadrature_weights,
    sample_depths,
)

log = logging.getLogger(__name__)

DEFAULT_CHUNK_POINTS = 16384


def render_image(field: Field, camera: CameraModel, alphas: np.ndarray,
                 omega: np.ndarray | None = None, psi: np.ndarray | None = None,
                 samples_per_ray: int = 64, stratified: bool = False,
                 seed: int = 0, background: np.ndarray | None = None,
                 chunk_points: int = DEFAULT_CHUNK_POINTS) -> dict[str, np.ndarray]:
    """Render color, region masks, depth, and opacity for one view.

    Deterministic given `seed`. Returns arrays: color (H, W, 3), masks
    (H, W, N+1), depth (H, W), opacity (H, W).
    """
    h, w = camera.height, camera.width
    alphas = np.asarray(alphas, dtype=np.float64)
    if np.any(np.abs(alphas) > 1.0):
        log.warning("render control values outside [-1, 1]; clamping")
        alphas = np.clip(alphas, -1.0, 1.0)
    origins, dirs = generate_rays(camera, pixel_grid(w, h))
    n_rays = len(origins)
    rng = np.random.default_rng(seed)
    depths = sample_depths(camera.near, camera.far, n_rays, samples_per_ray,
                           stratified, rng)
    n_channels = field.config.num_regions + 1
    color = np.empty((n_rays, 3), dtype=np.float32)
    masks = np.empty((n_rays, n_channels), dtype=np.float32)
    depth = np.empty(n_rays, dtype=np.float32)
    opacity = np.empty(n_rays, dtype=np.float32)

    rays_per_chunk = max(1, chunk_points // samples_per_ray)
    with no_grad():
        for start in range(0, n_rays, rays_per_chunk):
            sl = slice(start, min(start + rays_per_chunk, n_rays))
            r = sl.stop - sl.start
            t = depths[sl]
            pts = origins[sl, None, :] + t[:, :, None] * dirs[sl, None, :]
            flat_pts = as_tensor(pts.reshape(-1, 3).astype(np.float32))
            flat_dirs = np.repeat(dirs[sl].astype(np.float32), samples_per_ray, axis=0)
            out = field.query_control(flat_pts, flat_dirs, alphas, omega, psi)
            sigma = out.sigma.reshape(r, samples_per_ray)
            weights, _ = quadrature_weights(sigma, interval_lengths(t, camera.far))
            rgb, opac, dep = composite_color(
                weights, out.color.reshape(r, samples_per_ray, 3), t, background)
            mask = composite_mask(
                weights, out.masks.reshape(r, samples_per_ray, n_channels))
            color[sl] = rgb.data
            masks[sl] = mask.data
            depth[sl] = dep.data
            opacity[sl] = opac.data

    return {
        "color": color.reshape(h, w, 3),
        "masks": masks.reshape(h, w, n_channels),
        "depth": depth.reshape(h, w),
        "opacity": opacity.reshape(h, w),
    }


def to_uint8(img: np.ndarray) -> np.ndarray:
    return np.clip(np.round(np.asarray(img) * 255.0), 0, 255).astype(np.uint8)


def save_color_png(img: np.ndarray, path) -> None:
    Image.fromarray(to_uint8(img), mode="RGB").save(path)


def load_color_png(path) -> np.ndarray:
    return np.asarray(Image.open(path).convert("RGB"), dtype=np.float32) / 255.0


def save_depth_png(depth: np.ndarray, path) -> None:
    """16-bit depth with a JSON sidecar recording the value range."""
    lo = float(np.min(depth))
    hi = float(np.max(depth))
    span = hi - lo if hi > lo else 1.0
    scaled = np.round((depth - lo) / span * 65535.0).astype(np.uint16)
    Image.fromarray(scaled).save(path)
    with open(str(path) + ".json", "w") as f:
        json.dump({"min": lo, "max": hi}, f)


def load_depth_png(path) -> np.ndarray:
    raw = np.asarray(Image.open(path), dtype=np.float64) / 65535.0
    with open(str(path) + ".json") as f:
        meta = json.load(f)
    return raw * (meta["max"] - meta["min"]) + meta["min"]


def save_mask_pngs(masks: np.ndarray, path_prefix) -> list[Path]:
    """One grayscale PNG per channel: <prefix>_region{n}.png (0 = background)."""
    paths = []
    for n in range(masks.shape[-1]):
        p = Path(f"{path_prefix}_region{n}.png")
        Image.fromarray(to_uint8(masks[..., n]), mode="L").save(p)
        paths.append(p)
    return paths


def save_label_png(labels: np.ndarray, path) -> None:
    Image.fromarray(labels.astype(np.uint8), mode="L").save(path)


def load_label_png(path) -> np.ndarray:
    return np.asarray(Image.open(path), dtype=np.uint8)
