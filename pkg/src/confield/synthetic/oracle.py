"""Image-space measurement of attribute responses.

Stands in for the upstream face tracker when evaluating control fidelity:
given a rendered image, isolate each region by color, compute a footprint
statistic (spatial extent for radius attributes, centroid travel for offset
attributes), and invert it to a control estimate through a calibration curve
built from analytic renders.
"""

from __future__ import annotations

import numpy as np

from ..render.camera import CameraModel, project
from .scene import BlobSceneSpec, analytic_render, region_geometry, scene_camera

COLOR_MATCH_TOLERANCE = 0.45
MIN_FOOTPRINT_MASS = 3.0
CALIBRATION_POINTS = 11


def region_footprint(image: np.ndarray, region_color) -> tuple[np.ndarray, float]:
    """Soft color-match weights for one region; returns (weights (H, W), mass)."""
    img = np.asarray(image, dtype=np.float64)
    dist = np.linalg.norm(img - np.asarray(region_color, dtype=np.float64), axis=-1)
    weights = np.maximum(0.0, 1.0 - dist / COLOR_MATCH_TOLERANCE)
    weights[img.sum(axis=-1) < 0.1] = 0.0  # ignore near-black background
    return weights, float(weights.sum())


def _footprint_stats(weights: np.ndarray, mass: float) -> tuple[np.ndarray, float]:
    h, w = weights.shape
    ys, xs = np.mgrid[0:h, 0:w]
    cx = float((weights * xs).sum() / mass)
    cy = float((weights * ys).sum() / mass)
    rms = float(np.sqrt((weights * ((xs - cx) ** 2 + (ys - cy) ** 2)).sum() / mass))
    return np.array([cx, cy]), rms


class SceneOracle:
    """Calibrated measurement of one scene from one camera."""

    def __init__(self, spec: BlobSceneSpec, camera: CameraModel,
                 calibration_points: int = CALIBRATION_POINTS,
                 calibration_samples: int = 96):
        self.spec = spec
        self.camera = camera
        self._grid = np.linspace(-1.0, 1.0, calibration_points)
        self._curves: list[np.ndarray | None] = []
        self._axes: list[np.ndarray] = []

        base_centers, _ = region_geometry(spec, np.zeros(spec.num_attributes))
        for k, binding in enumerate(spec.bindings):
            center = base_centers[binding.region - 1]
            tip = center + np.asarray(binding.axis) * max(binding.gain, 1e-6)
            px = project(camera, np.stack([center, tip]))
            axis_px = px[1] - px[0]
            norm = np.linalg.norm(axis_px)
            self._axes.append(axis_px / norm if norm > 1e-9 else np.array([1.0, 0.0]))

            curve = []
            measurable = True
            for value in self._grid:
                alphas = np.zeros(spec.num_attributes)
                alphas[k] = value
                frame = analytic_render(spec, camera, alphas,
                                        samples_per_ray=calibration_samples)
                s = self._statistic(frame["color"], k)
                if s is None:
                    measurable = False
                    break
                curve.append(s)
            self._curves.append(np.asarray(curve) if measurable else None)

    def _statistic(self, image: np.ndarray, attribute: int) -> float | None:
        binding = self.spec.bindings[attribute]
        weights, mass = region_footprint(image, self.spec.colors[binding.region - 1])
        if mass < MIN_FOOTPRINT_MASS:
            return None
        centroid, rms = _footprint_stats(weights, mass)
        if binding.effect == "radius-scale":
            return rms
        return float(centroid @ self._axes[attribute])

    def measurable(self, attribute: int) -> bool:
        curve = self._curves[attribute]
        if curve is None:
            return False
        span = curve.max() - curve.min()
        return span > 1e-6 and (np.all(np.diff(curve) > 0) or np.all(np.diff(curve) < 0))

    def measure(self, image: np.ndarray, attribute: int) -> float | None:
        """Invert the footprint statistic into a control estimate in [-1, 1]."""
        if not self.measurable(attribute):
            return None
        s = self._statistic(image, attribute)
        if s is None:
            return None
        curve = self._curves[attribute]
        if curve[0] > curve[-1]:
            return float(np.interp(s, curve[::-1], self._grid[::-1]))
        return float(np.interp(s, curve, self._grid))

    def measure_all(self, image: np.ndarray) -> list[float | None]:
        return [self.measure(image, k) for k in range(self.spec.num_attributes)]


def best_view(spec: BlobSceneSpec, width: int, height: int,
              candidates: int = 24) -> CameraModel:
    """Azimuth maximizing the minimum pixel separation of projected centers."""
    centers, _ = region_geometry(spec, np.zeros(spec.num_attributes))
    best = None
    best_sep = -1.0
    for az in np.linspace(0, 2 * np.pi, candidates, endpoint=False):
        cam = scene_camera(spec, az, width, height)
        px = project(cam, centers)
        sep = min(
            np.linalg.norm(px[i] - px[j])
            for i in range(len(px)) for j in range(i + 1, len(px)))
        if sep > best_sep:
            best_sep = sep
            best = cam
    return best
