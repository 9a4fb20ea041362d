"""Semantic face regions from 68-point landmarks.

Three regions partition the face: (1) brow/forehead band above the
brow-eye midline, (2) the eye/nose band between that midline and the
lower-face polygon, (3) the lower face enclosed by jaw landmarks #3-#13
closed through nose-bridge landmark #28. Everything else is background 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image

from ..errors import ConfigurationError, GeometryError

# Landmark index groups (iBUG-68 convention used by the upstream tracker).
JAW = tuple(range(0, 17))
LEFT_BROW = tuple(range(17, 22))
RIGHT_BROW = tuple(range(22, 27))
LEFT_EYE = tuple(range(36, 42))
RIGHT_EYE = tuple(range(42, 48))
LOWER_FACE_JAW = tuple(range(3, 14))  # jaw #3..#13
NOSE_BRIDGE_POINT = 28

BROW_EXTENSION_FRACTION = 0.25  # extend the midline past each brow end
FOREHEAD_BAND_FRACTION = 0.45   # band height as a fraction of face height


@dataclass(frozen=True)
class RegionTopology:
    """Many-to-one assignment of K attributes to N regions (1-based ids)."""

    num_regions: int
    region_of_attribute: tuple[int, ...]

    def __post_init__(self):
        if self.num_regions < 1:
            raise ConfigurationError("need at least one region")
        for r in self.region_of_attribute:
            if not 1 <= r <= self.num_regions:
                raise ConfigurationError(
                    f"attribute region {r} outside 1..{self.num_regions}")
        covered = set(self.region_of_attribute)
        missing = set(range(1, self.num_regions + 1)) - covered
        if missing:
            raise ConfigurationError(f"regions {sorted(missing)} have no attributes")

    @property
    def num_attributes(self) -> int:
        return len(self.region_of_attribute)

    def attributes_of_region(self, region: int) -> tuple[int, ...]:
        return tuple(i for i, r in enumerate(self.region_of_attribute) if r == region)


# Default assignment of the 17 tracked AUs: brows -> 1, eyes -> 2, lower face -> 3.
DEFAULT_AU_REGIONS = {
    "AU01": 1, "AU02": 1, "AU04": 1,
    "AU05": 2, "AU06": 2, "AU07": 2, "AU45": 2,
    "AU09": 3, "AU10": 3, "AU12": 3, "AU14": 3, "AU15": 3,
    "AU17": 3, "AU20": 3, "AU23": 3, "AU25": 3, "AU26": 3,
}


def default_au_topology(au_names) -> RegionTopology:
    return RegionTopology(3, tuple(DEFAULT_AU_REGIONS[name] for name in au_names))


@dataclass(frozen=True)
class RegionMaskImage:
    """Per-pixel region labels in {0..N}; 0 is background."""

    labels: np.ndarray  # (H, W) uint8
    num_regions: int

    def save(self, path) -> None:
        Image.fromarray(self.labels, mode="L").save(path)

    @staticmethod
    def load(path, num_regions: int) -> "RegionMaskImage":
        labels = np.asarray(Image.open(path), dtype=np.uint8)
        return RegionMaskImage(labels, num_regions)


def polygon_area(poly: np.ndarray) -> float:
    """Signed shoelace area."""
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def fill_polygon(poly: np.ndarray, width: int, height: int) -> np.ndarray:
    """Even-odd scanline fill; pixel (i, j) is sampled at point (i, j)."""
    out = np.zeros((height, width), dtype=bool)
    x0 = poly[:, 0]
    y0 = poly[:, 1]
    x1 = np.roll(x0, -1)
    y1 = np.roll(y0, -1)
    ymin = max(0, int(np.floor(poly[:, 1].min())))
    ymax = min(height - 1, int(np.ceil(poly[:, 1].max())))
    for row in range(ymin, ymax + 1):
        crossing = (y0 > row) != (y1 > row)
        if not crossing.any():
            continue
        t = (row - y0[crossing]) / (y1[crossing] - y0[crossing])
        xs = np.sort(x0[crossing] + t * (x1[crossing] - x0[crossing]))
        for lo, hi in zip(xs[0::2], xs[1::2]):
            left = max(0, int(np.ceil(lo)))
            right = int(np.floor(hi))
            if hi == right:
                right -= 1  # span is [lo, hi): right boundary excluded
            right = min(width - 1, right)
            if left <= right:
                out[row, left:right + 1] = True
    return out


def _nearest(point: np.ndarray, candidates: np.ndarray) -> np.ndarray:
    d = np.linalg.norm(candidates - point, axis=1)
    return candidates[int(np.argmin(d))]


def brow_eye_midline(landmarks: np.ndarray) -> np.ndarray:
    """Midpoints between each brow landmark and its nearest eye landmark,
    sorted by x and extended past both brow ends."""
    pts = []
    for brow, eye in ((LEFT_BROW, LEFT_EYE), (RIGHT_BROW, RIGHT_EYE)):
        eye_pts = landmarks[list(eye)]
        for b in brow:
            bp = landmarks[b]
            pts.append(0.5 * (bp + _nearest(bp, eye_pts)))
    pts = np.array(sorted(pts, key=lambda p: p[0]))

    left_len = np.linalg.norm(landmarks[LEFT_BROW[-1]] - landmarks[LEFT_BROW[0]])
    right_len = np.linalg.norm(landmarks[RIGHT_BROW[-1]] - landmarks[RIGHT_BROW[0]])
    if left_len < 1e-9 or right_len < 1e-9:
        raise GeometryError("degenerate eyebrow landmarks (zero length)")

    dir_left = pts[0] - pts[1]
    dir_right = pts[-1] - pts[-2]
    norm_l = np.linalg.norm(dir_left)
    norm_r = np.linalg.norm(dir_right)
    if norm_l < 1e-9 or norm_r < 1e-9:
        raise GeometryError("degenerate brow-eye midline")
    ext_left = pts[0] + dir_left / norm_l * BROW_EXTENSION_FRACTION * left_len
    ext_right = pts[-1] + dir_right / norm_r * BROW_EXTENSION_FRACTION * right_len
    return np.vstack([ext_left, pts, ext_right])


def build_region_masks(landmarks: np.ndarray, width: int, height: int,
                       topology: RegionTopology) -> RegionMaskImage:
    """Rasterize the three face regions into a label image.

    Raises GeometryError when the landmark set is degenerate (collinear or
    zero-area lower-face polygon).
    """
    landmarks = np.asarray(landmarks, dtype=np.float64)
    if landmarks.shape != (68, 2):
        raise GeometryError(f"expected (68, 2) landmarks, got {landmarks.shape}")
    if topology.num_regions != 3:
        raise ConfigurationError(
            f"landmark-driven masks define 3 regions, topology has {topology.num_regions}")

    lower_poly = np.vstack([landmarks[list(LOWER_FACE_JAW)], landmarks[NOSE_BRIDGE_POINT]])
    if abs(polygon_area(lower_poly)) < 1e-6:
        raise GeometryError("lower-face polygon has zero area (collinear landmarks)")

    midline = brow_eye_midline(landmarks)
    face_height = float(landmarks[list(JAW), 1].max() - midline[:, 1].min())
    if face_height < 1e-9:
        raise GeometryError("degenerate face height")
    band = FOREHEAD_BAND_FRACTION * face_height
    forehead_poly = np.vstack([midline, (midline - [0.0, band])[::-1]])

    # Face interior below the midline: jaw outline closed across the brows.
    face_poly = np.vstack([landmarks[list(JAW)], midline[::-1]])

    m_lower = fill_polygon(lower_poly, width, height)
    m_forehead = fill_polygon(forehead_poly, width, height)
    m_face = fill_polygon(face_poly, width, height)

    labels = np.zeros((height, width), dtype=np.uint8)
    labels[m_face] = 2
    labels[m_forehead & ~m_lower] = 1
    labels[m_lower] = 3
    return RegionMaskImage(labels, topology.num_regions)
