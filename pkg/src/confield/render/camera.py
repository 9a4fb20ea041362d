"""Pinhole cameras and ray generation.

Conventions: camera looks along +z in its own frame with x right and y down
(intrinsics act on (x/z, y/z, 1)); pixel (u, v) is sampled at the continuous
point (u + 0.5, v + 0.5); `world_from_camera` maps camera-frame vectors into
the world.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionError, GeometryError


@dataclass(frozen=True)
class CameraModel:
    intrinsics: np.ndarray        # (3, 3)
    world_from_camera: np.ndarray  # (4, 4)
    width: int
    height: int
    near: float
    far: float

    def __post_init__(self):
        k = np.asarray(self.intrinsics)
        if k.shape != (3, 3) or k[0, 0] <= 0 or k[1, 1] <= 0:
            raise GeometryError("intrinsics must be 3x3 with positive focal lengths")
        r = np.asarray(self.world_from_camera)[:3, :3]
        if np.max(np.abs(r @ r.T - np.eye(3))) > 1e-6:
            raise GeometryError("pose rotation is not orthonormal")
        if not self.far > self.near > 0:
            raise GeometryError(f"need far > near > 0, got [{self.near}, {self.far}]")

    @property
    def position(self) -> np.ndarray:
        return np.asarray(self.world_from_camera)[:3, 3]


def pixel_grid(width: int, height: int) -> np.ndarray:
    """All (u, v) pixel indices, row-major: shape (H*W, 2)."""
    u, v = np.meshgrid(np.arange(width), np.arange(height))
    return np.stack([u.ravel(), v.ravel()], axis=1)


def generate_rays(camera: CameraModel, pixels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """World-space rays through the given pixel centers.

    Returns (origins (M, 3), unit directions (M, 3)).
    """
    pixels = np.asarray(pixels, dtype=np.float64)
    if pixels.ndim != 2 or pixels.shape[1] != 2:
        raise DimensionError(f"pixels must be (M, 2), got {pixels.shape}")
    if np.any(pixels[:, 0] >= camera.width) or np.any(pixels[:, 1] >= camera.height) \
            or np.any(pixels < 0):
        raise DimensionError("pixel indices outside image bounds")
    k = np.asarray(camera.intrinsics, dtype=np.float64)
    centers = pixels + 0.5
    dirs_cam = np.stack([
        (centers[:, 0] - k[0, 2]) / k[0, 0],
        (centers[:, 1] - k[1, 2]) / k[1, 1],
        np.ones(len(pixels)),
    ], axis=1)
    rot = np.asarray(camera.world_from_camera, dtype=np.float64)[:3, :3]
    dirs = dirs_cam @ rot.T
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    origins = np.broadcast_to(camera.position, dirs.shape).copy()
    return origins, dirs


def project(camera: CameraModel, points: np.ndarray) -> np.ndarray:
    """World points to continuous pixel coordinates (inverse of generate_rays)."""
    pose = np.asarray(camera.world_from_camera, dtype=np.float64)
    rot = pose[:3, :3]
    cam = (np.asarray(points, dtype=np.float64) - pose[:3, 3]) @ rot
    k = np.asarray(camera.intrinsics, dtype=np.float64)
    uv = cam[:, :2] / cam[:, 2:3]
    return np.stack([k[0, 0] * uv[:, 0] + k[0, 2],
                     k[1, 1] * uv[:, 1] + k[1, 2]], axis=1) - 0.5


def orbit_camera(azimuth: float, elevation: float, radius: float,
                 width: int, height: int, focal: float,
                 near: float, far: float,
                 target: np.ndarray | None = None) -> CameraModel:
    """Camera on a sphere around `target`, looking at it; angles in radians."""
    target = np.zeros(3) if target is None else np.asarray(target, dtype=np.float64)
    pos = target + radius * np.array([
        np.cos(elevation) * np.cos(azimuth),
        np.cos(elevation) * np.sin(azimuth),
        np.sin(elevation),
    ])
    forward = target - pos
    forward /= np.linalg.norm(forward)
    up = np.array([0.0, 0.0, 1.0])
    if abs(np.dot(forward, up)) > 0.999:
        raise GeometryError("orbit camera looking straight up/down is degenerate")
    right = np.cross(forward, up)
    right /= np.linalg.norm(right)
    down = np.cross(forward, right)

    pose = np.eye(4)
    pose[:3, 0] = right
    pose[:3, 1] = down
    pose[:3, 2] = forward
    pose[:3, 3] = pos
    intrinsics = np.array([
        [focal, 0.0, width / 2.0],
        [0.0, focal, height / 2.0],
        [0.0, 0.0, 1.0],
    ])
    return CameraModel(intrinsics, pose, width, height, near, far)
