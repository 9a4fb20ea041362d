"""Cameras, ray quadrature, and image rendering."""

from .camera import CameraModel, generate_rays, orbit_camera, pixel_grid, project
from .images import (
    load_color_png,
    load_depth_png,
    load_label_png,
    render_image,
    save_color_png,
    save_depth_png,
    save_label_png,
    save_mask_pngs,
    to_uint8,
)
from .integrate import (
    OPACITY_FLOOR,
    composite_color,
    composite_mask,
    interval_lengths,
    quadrature_weights,
    sample_depths,
)

__all__ = [
    "CameraModel",
    "OPACITY_FLOOR",
    "composite_color",
    "composite_mask",
    "generate_rays",
    "interval_lengths",
    "load_color_png",
    "load_depth_png",
    "load_label_png",
    "orbit_camera",
    "pixel_grid",
    "project",
    "quadrature_weights",
    "render_image",
    "sample_depths",
    "save_color_png",
    "save_depth_png",
    "save_label_png",
    "save_mask_pngs",
    "to_uint8",
]
