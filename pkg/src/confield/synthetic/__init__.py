"""Procedural ground-truth scene generation and measurement."""

from .oracle import SceneOracle, best_view, region_footprint
from .scene import (
    AttributeBinding,
    BlobSceneSpec,
    analytic_field,
    analytic_render,
    attribute_trajectory,
    default_scene_spec,
    generate_dataset,
    region_geometry,
    scene_camera,
)

__all__ = [
    "AttributeBinding",
    "BlobSceneSpec",
    "SceneOracle",
    "analytic_field",
    "analytic_render",
    "attribute_trajectory",
    "best_view",
    "default_scene_spec",
    "generate_dataset",
    "region_footprint",
    "region_geometry",
    "scene_camera",
]
