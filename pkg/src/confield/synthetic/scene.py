"""Procedural ground-truth scene: Gaussian blobs with controllable deformations.

Each region is one blob; attributes scale a blob's radius or translate its
center along a fixed axis. Density, color, and region labels have closed
forms, so rendered images come with exact masks and attribute labels: the
measurement oracle for control fidelity.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..autodiff import as_tensor, no_grad
from ..errors import ConfigurationError
from ..facs.manifest import DatasetManifest, FrameRecord, write_dataset_manifest
from ..facs.regions import RegionTopology
from ..render.camera import CameraModel, generate_rays, orbit_camera, pixel_grid
from ..render.images import save_color_png, save_label_png, to_uint8
from ..render.integrate import (
    composite_color,
    interval_lengths,
    quadrature_weights,
    sample_depths,
)

LABEL_THRESHOLD = 0.01   # fraction of peak density below which a point is background
MASK_OPACITY_THRESHOLD = 0.05
GT_SAMPLES_PER_RAY = 160


@dataclass(frozen=True)
class AttributeBinding:
    """How one control attribute deforms its region's blob."""

    region: int                 # 1-based region id
    effect: str                 # "radius-scale" | "offset"
    gain: float
    axis: tuple[float, float, float] = (0.0, 0.0, 1.0)

    def __post_init__(self):
        if self.effect not in ("radius-scale", "offset"):
            raise ConfigurationError(f"unknown attribute effect {self.effect!r}")


@dataclass(frozen=True)
class BlobSceneSpec:
    centers: tuple[tuple[float, float, float], ...]
    radii: tuple[float, ...]
    colors: tuple[tuple[float, float, float], ...]
    bindings: tuple[AttributeBinding, ...]
    peak_density: float = 40.0
    support_cutoff: float = 2.5     # blob density is exactly zero beyond cutoff*radius
    orbit_radius: float = 4.0
    orbit_elevation: float = 0.35
    focal_per_pixel: float = 0.72   # focal = width * focal_per_pixel
    near: float = 1.7
    far: float = 6.3

    def __post_init__(self):
        n = len(self.centers)
        if not (len(self.radii) == len(self.colors) == n):
            raise ConfigurationError("centers/radii/colors length mismatch")
        for b in self.bindings:
            if not 1 <= b.region <= n:
                raise ConfigurationError(f"binding region {b.region} outside 1..{n}")
        # compact support: regions must stay disjoint at any control setting
        reach = []
        for r in range(1, n + 1):
            radius = self.radii[r - 1]
            scale = sum(abs(b.gain) for b in self.bindings
                        if b.region == r and b.effect == "radius-scale")
            shift = sum(abs(b.gain) for b in self.bindings
                        if b.region == r and b.effect == "offset")
            reach.append(self.support_cutoff * radius * (1.0 + scale) + shift)
        centers = np.asarray(self.centers, dtype=np.float64)
        for i in range(n):
            for j in range(i + 1, n):
                dist = float(np.linalg.norm(centers[i] - centers[j]))
                if dist <= reach[i] + reach[j]:
                    raise ConfigurationError(
                        f"regions {i + 1} and {j + 1} can overlap: "
                        f"distance {dist:.3f} <= reach {reach[i] + reach[j]:.3f}")

    @property
    def num_regions(self) -> int:
        return len(self.centers)

    @property
    def num_attributes(self) -> int:
        return len(self.bindings)

    @property
    def topology(self) -> RegionTopology:
        return RegionTopology(self.num_regions, tuple(b.region for b in self.bindings))

    def to_dict(self) -> dict:
        return {
            "centers": [list(c) for c in self.centers],
            "radii": list(self.radii),
            "colors": [list(c) for c in self.colors],
            "bindings": [
                {"region": b.region, "effect": b.effect, "gain": b.gain, "axis": list(b.axis)}
                for b in self.bindings
            ],
            "peak_density": self.peak_density,
            "orbit_radius": self.orbit_radius,
            "orbit_elevation": self.orbit_elevation,
            "focal_per_pixel": self.focal_per_pixel,
            "near": self.near,
            "far": self.far,
        }

    @staticmethod
    def from_dict(doc: dict) -> "BlobSceneSpec":
        return BlobSceneSpec(
            centers=tuple(tuple(c) for c in doc["centers"]),
            radii=tuple(doc["radii"]),
            colors=tuple(tuple(c) for c in doc["colors"]),
            bindings=tuple(
                AttributeBinding(b["region"], b["effect"], b["gain"], tuple(b["axis"]))
                for b in doc["bindings"]
            ),
            peak_density=doc["peak_density"],
            orbit_radius=doc["orbit_radius"],
            orbit_elevation=doc["orbit_elevation"],
            focal_per_pixel=doc["focal_per_pixel"],
            near=doc["near"],
            far=doc["far"],
        )


def default_scene_spec() -> BlobSceneSpec:
    """Three blobs, six attributes (radius + vertical offset per region)."""
    angles = np.deg2rad([90.0, 210.0, 330.0])
    centers = tuple((float(1.3 * np.cos(a)), float(1.3 * np.sin(a)), 0.0) for a in angles)
    return BlobSceneSpec(
        centers=centers,
        radii=(0.24, 0.24, 0.24),
        colors=((0.9, 0.25, 0.2), (0.2, 0.85, 0.3), (0.25, 0.35, 0.95)),
        bindings=(
            AttributeBinding(1, "radius-scale", 0.3),
            AttributeBinding(1, "offset", 0.28, (0.0, 0.0, 1.0)),
            AttributeBinding(2, "radius-scale", 0.3),
            AttributeBinding(2, "offset", 0.28, (0.0, 0.0, 1.0)),
            AttributeBinding(3, "radius-scale", 0.3),
            AttributeBinding(3, "offset", 0.28, (0.0, 0.0, 1.0)),
        ),
        orbit_radius=4.6,
        near=2.0,
        far=7.2,
    )


def region_geometry(spec: BlobSceneSpec, alphas: np.ndarray
                    ) -> tuple[np.ndarray, np.ndarray]:
    """Centers (N, 3) and radii (N,) after applying the control vector."""
    alphas = np.asarray(alphas, dtype=np.float64)
    centers = np.asarray(spec.centers, dtype=np.float64).copy()
    radii = np.asarray(spec.radii, dtype=np.float64).copy()
    for k, b in enumerate(spec.bindings):
        idx = b.region - 1
        if b.effect == "radius-scale":
            radii[idx] *= 1.0 + b.gain * alphas[k]
        else:
            centers[idx] += b.gain * alphas[k] * np.asarray(b.axis)
    return centers, radii


def analytic_field(spec: BlobSceneSpec, alphas: np.ndarray, points: np.ndarray
                   ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Exact density, color, and region label at arbitrary points.

    Returns (sigma (B,), color (B, 3), label (B,) in 0..N).
    """
    points = np.asarray(points, dtype=np.float64)
    centers, radii = region_geometry(spec, alphas)
    d2 = ((points[:, None, :] - centers[None]) ** 2).sum(axis=-1)
    # Gaussian profile shifted to reach exactly zero at the support cutoff,
    # so a blob has no influence whatsoever outside its sphere.
    floor = np.exp(-spec.support_cutoff ** 2 / 2.0)
    profile = np.exp(-d2 / (2.0 * radii[None] ** 2))
    contrib = spec.peak_density * np.maximum(0.0, profile - floor) / (1.0 - floor)
    sigma = contrib.sum(axis=1)
    weights = contrib / np.maximum(sigma[:, None], 1e-12)
    color = weights @ np.asarray(spec.colors, dtype=np.float64)
    color[sigma < 1e-9] = 0.0
    label = np.where(
        contrib.max(axis=1) > LABEL_THRESHOLD * spec.peak_density,
        contrib.argmax(axis=1) + 1, 0)
    return sigma, color, label


def scene_camera(spec: BlobSceneSpec, azimuth: float, width: int, height: int,
                 elevation: float | None = None) -> CameraModel:
    return orbit_camera(
        azimuth,
        spec.orbit_elevation if elevation is None else elevation,
        spec.orbit_radius, width, height,
        focal=width * spec.focal_per_pixel,
        near=spec.near, far=spec.far,
    )


def analytic_render(spec: BlobSceneSpec, camera: CameraModel, alphas: np.ndarray,
                    samples_per_ray: int = GT_SAMPLES_PER_RAY
                    ) -> dict[str, np.ndarray]:
    """Ground-truth render through the standard quadrature.

    Deterministic (jitter-free sampling). Returns color (H, W, 3),
    labels (H, W) in 0..N, opacity (H, W), depth (H, W).
    """
    h, w = camera.height, camera.width
    origins, dirs = generate_rays(camera, pixel_grid(w, h))
    t = sample_depths(camera.near, camera.far, len(origins), samples_per_ray,
                      stratified=False, dtype=np.float64)
    pts = origins[:, None, :] + t[:, :, None] * dirs[:, None, :]
    sigma, color, label = analytic_field(spec, alphas, pts.reshape(-1, 3))
    r, s = len(origins), samples_per_ray

    with no_grad():
        weights, _ = quadrature_weights(
            as_tensor(sigma.reshape(r, s).astype(np.float32)),
            interval_lengths(t, camera.far).astype(np.float32))
        rgb, opacity, depth = composite_color(
            weights, as_tensor(color.reshape(r, s, 3).astype(np.float32)),
            t.astype(np.float32))
        w_np = weights.data

    # label = strongest rendered region, background when the ray is empty
    one_hot = np.zeros((r, s, spec.num_regions + 1), dtype=np.float32)
    np.put_along_axis(one_hot, label.reshape(r, s, 1).astype(int), 1.0, axis=2)
    region_weight = (w_np[:, :, None] * one_hot).sum(axis=1)
    labels = np.where(
        opacity.data > MASK_OPACITY_THRESHOLD,
        region_weight[:, 1:].argmax(axis=1) + 1, 0)

    return {
        "color": rgb.data.reshape(h, w, 3),
        "labels": labels.reshape(h, w).astype(np.uint8),
        "opacity": opacity.data.reshape(h, w),
        "depth": depth.data.reshape(h, w),
    }


def solo_sweep(length: int) -> np.ndarray:
    """0 -> -1 (hold) -> +1 (hold) -> 0, piecewise linear.

    Starts and ends neutral so consecutive segments stay continuous; the
    holds at the extremes give the field several frames (hence several
    viewpoints) of supervision at full control deflection.
    """
    q = max(1, length // 5)
    hold = max(1, length // 8)
    mid = length - 2 * q - 2 * hold
    parts = [
        np.linspace(0.0, -1.0, q, endpoint=False),
        np.full(hold, -1.0),
        np.linspace(-1.0, 1.0, mid, endpoint=False),
        np.full(hold, 1.0),
        np.linspace(1.0, 0.0, q, endpoint=False),
    ]
    return np.concatenate(parts)[:length]


def attribute_trajectory(spec: BlobSceneSpec, n_frames: int, seed: int,
                         solo_fraction: float = 0.6) -> np.ndarray:
    """Control curve: one solo sweep per attribute, then smooth random mixes.

    The whole curve is continuous with small per-frame steps; the mixed
    segment uses low-frequency sinusoids tapered in from zero. Frame
    interpolation between neighbors relies on that smoothness.
    """
    k = spec.num_attributes
    rng = np.random.default_rng(seed)
    solo_len = int(n_frames * solo_fraction) // k
    alphas = np.zeros((n_frames, k))
    cursor = 0
    if solo_len >= 4:
        for a in range(k):
            if cursor + solo_len > n_frames:
                break
            alphas[cursor:cursor + solo_len, a] = solo_sweep(solo_len)
            cursor += solo_len
    mixed = n_frames - cursor
    if mixed > 0:
        t = np.linspace(0.0, 1.0, mixed)
        envelope = np.minimum(1.0, 6.0 * t)  # taper in from the neutral pose
        for a in range(k):
            amp = rng.uniform(0.6, 1.0)
            freq = rng.uniform(0.8, 1.8)
            phase = rng.uniform(0, 2 * np.pi)
            wobble = 0.2 * np.sin(2 * np.pi * freq * 2.3 * t + rng.uniform(0, 2 * np.pi))
            alphas[cursor:, a] = envelope * np.clip(
                amp * np.sin(2 * np.pi * freq * t + phase) + wobble, -1.0, 1.0)
    return alphas


def generate_dataset(spec: BlobSceneSpec, n_frames: int, out_dir,
                     image_size: int = 64, seed: int = 0,
                     samples_per_ray: int = GT_SAMPLES_PER_RAY,
                     orbit_turns: float = 1.0) -> Path:
    """Render the full training set and write a dataset manifest.

    Returns the manifest path. Cameras orbit the scene while the attribute
    trajectory plays; image, exact mask, camera, and control vector are
    stored per frame.
    """
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    (out_dir / "masks").mkdir(parents=True, exist_ok=True)

    alphas = attribute_trajectory(spec, n_frames, seed)
    records = []
    for i in range(n_frames):
        azimuth = 2.0 * np.pi * orbit_turns * i / n_frames
        camera = scene_camera(spec, azimuth, image_size, image_size)
        rendered = analytic_render(spec, camera, alphas[i], samples_per_ray)
        image_path = out_dir / "images" / f"{i:06d}.png"
        mask_path = out_dir / "masks" / f"{i:06d}.png"
        save_color_png(rendered["color"], image_path)
        save_label_png(rendered["labels"], mask_path)
        records.append(FrameRecord(
            frame_index=i,
            image_path=str(image_path),
            mask_path=str(mask_path),
            intrinsics=camera.intrinsics,
            world_from_camera=camera.world_from_camera,
            attributes=alphas[i],
            delta=np.ones(spec.num_attributes),
            latent_index=i,
            timestamp=i / 30.0,
        ))

    # Attributes take tracker AU names so a tracked source CSV can drive the
    # trained model through the expression-transfer path.
    from ..facs.tracking import AU_NAMES

    k = spec.num_attributes
    names = AU_NAMES[:k] if k <= len(AU_NAMES) else tuple(f"attr{i}" for i in range(k))
    manifest = DatasetManifest(
        records=records,
        topology=spec.topology,
        attribute_names=tuple(names),
        au_min=np.zeros(spec.num_attributes),
        au_max=np.full(spec.num_attributes, 5.0),
        alpha=0.8,
        image_size=(image_size, image_size),
        near=spec.near,
        far=spec.far,
        synthetic=True,
        scene_spec=spec.to_dict(),
        extras={"seed": seed, "orbit_turns": orbit_turns},
    )
    manifest_path = out_dir / "manifest.json"
    write_dataset_manifest(manifest, manifest_path)
    return manifest_path
