"""Quantitative evaluation protocols against the synthetic ground truth.

Control fidelity (ICC between commanded and measured responses), image-level
decoupling (leakage of one attribute's edits outside its region), held-out
frame interpolation quality, and expression transfer from a tracked source
sequence.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import binary_dilation

from ..errors import ConfigurationError
from ..facs.manifest import DatasetManifest
from ..facs.normalize import normalize_au
from ..facs.tracking import AU_COLUMNS, ingest_tracking_csv, smooth_au_tracks
from ..field.model import Field
from ..render.camera import CameraModel
from ..render.images import load_color_png, render_image
from ..synthetic.oracle import SceneOracle, best_view
from ..synthetic.scene import BlobSceneSpec, analytic_render, scene_camera
from .metrics import icc, ms_ssim, psnr

log = logging.getLogger(__name__)

CONTROL_GRID_POINTS = 11
LEAKAGE_DILATION_PX = 2
RENDER_SAMPLES = 96


@dataclass
class IccReport:
    attribute_names: tuple[str, ...]
    per_attribute: list[float | None]       # None = unmeasurable
    commanded: list[list[float]]
    measured: list[list[float | None]]
    mean_icc: float = 0.0
    measurable_count: int = 0

    def finalize(self) -> "IccReport":
        vals = [v for v in self.per_attribute if v is not None]
        self.measurable_count = len(vals)
        self.mean_icc = float(np.mean(vals)) if vals else 0.0
        return self

    def to_dict(self) -> dict:
        return {
            "attribute_names": list(self.attribute_names),
            "per_attribute_icc": self.per_attribute,
            "mean_icc": self.mean_icc,
            "measurable_count": self.measurable_count,
            "commanded": self.commanded,
            "measured": self.measured,
        }


@dataclass
class QualityReport:
    frame_indices: list[int]
    psnr_values: list[float]
    ms_ssim_values: list[float]
    mean_psnr: float = 0.0
    mean_ms_ssim: float = 0.0

    def finalize(self) -> "QualityReport":
        self.mean_psnr = float(np.mean(self.psnr_values)) if self.psnr_values else 0.0
        self.mean_ms_ssim = float(np.mean(self.ms_ssim_values)) if self.ms_ssim_values else 0.0
        return self

    def to_dict(self) -> dict:
        return {
            "frame_indices": self.frame_indices,
            "psnr": self.psnr_values,
            "ms_ssim": self.ms_ssim_values,
            "mean_psnr": self.mean_psnr,
            "mean_ms_ssim": self.mean_ms_ssim,
        }


def _scene_from_sidecar(sidecar: dict) -> BlobSceneSpec:
    if not sidecar.get("scene_spec"):
        raise ConfigurationError(
            "checkpoint sidecar carries no synthetic scene; this protocol "
            "needs ground truth")
    return BlobSceneSpec.from_dict(sidecar["scene_spec"])


def control_render(field: Field, camera: CameraModel, alphas: np.ndarray,
                   samples: int = RENDER_SAMPLES, seed: int = 0) -> dict:
    """Neutral-code control render used by all protocols."""
    return render_image(field, camera, alphas, omega=None, psi=None,
                        samples_per_ray=samples, stratified=False, seed=seed)


def icc_protocol(field: Field, sidecar: dict,
                 grid_points: int = CONTROL_GRID_POINTS,
                 image_size: int | None = None,
                 render_samples: int = RENDER_SAMPLES) -> IccReport:
    """Solo control ramps, measured back from renders, scored with ICC(3,1)."""
    spec = _scene_from_sidecar(sidecar)
    size = image_size or sidecar.get("image_size", [64, 64])[0]
    camera = best_view(spec, size, size)
    oracle = SceneOracle(spec, camera)
    k = spec.num_attributes
    grid = np.linspace(-1.0, 1.0, grid_points)

    report = IccReport(
        attribute_names=tuple(sidecar.get("attribute_names",
                                          [f"attr{i}" for i in range(k)])),
        per_attribute=[None] * k,
        commanded=[[float(v) for v in grid] for _ in range(k)],
        measured=[[None] * grid_points for _ in range(k)],
    )
    for a in range(k):
        series = []
        for gi, value in enumerate(grid):
            alphas = np.zeros(k)
            alphas[a] = value
            out = control_render(field, camera, alphas, samples=render_samples)
            m = oracle.measure(out["color"], a)
            report.measured[a][gi] = m
            series.append(m)
        if any(m is None for m in series):
            log.warning("attribute %d unmeasurable from this view; excluded", a)
            continue
        measured = np.asarray(series, dtype=np.float64)
        if np.allclose(measured, measured[0]) and np.allclose(grid, grid[0]):
            report.per_attribute[a] = 0.0
        else:
            report.per_attribute[a] = icc(grid, measured)
    return report.finalize()


def decoupling_score(field: Field, sidecar: dict,
                     image_size: int | None = None,
                     render_samples: int = RENDER_SAMPLES
                     ) -> dict:
    """Leakage of each attribute's edits outside its ground-truth region.

    leakage(j) = mean |delta C| outside region_j's mask (dilated) over mean
    |delta C| inside. The matrix column n gives the spill into each region.
    """
    spec = _scene_from_sidecar(sidecar)
    size = image_size or sidecar.get("image_size", [64, 64])[0]
    camera = best_view(spec, size, size)
    k = spec.num_attributes
    n_regions = spec.num_regions

    leakage = np.zeros(k)
    matrix = np.zeros((k, n_regions))
    for j in range(k):
        region_j = spec.bindings[j].region
        lo = np.zeros(k)
        lo[j] = -1.0
        hi = np.zeros(k)
        hi[j] = 1.0
        img_lo = control_render(field, camera, lo, samples=render_samples)["color"]
        img_hi = control_render(field, camera, hi, samples=render_samples)["color"]
        diff = np.abs(img_hi.astype(np.float64) - img_lo).mean(axis=-1)

        masks = []
        for alphas in (lo, np.zeros(k), hi):
            masks.append(analytic_render(spec, camera, alphas,
                                         samples_per_ray=64)["labels"])
        region_mask = np.any([m == region_j for m in masks], axis=0)
        region_mask = binary_dilation(region_mask, iterations=LEAKAGE_DILATION_PX)

        inside = diff[region_mask].mean() if region_mask.any() else np.nan
        outside = diff[~region_mask].mean() if (~region_mask).any() else 0.0
        leakage[j] = outside / inside if inside and inside > 0 else np.inf
        for n in range(1, n_regions + 1):
            other = np.any([m == n for m in masks], axis=0)
            other = binary_dilation(other, iterations=LEAKAGE_DILATION_PX)
            if other.any() and inside and inside > 0:
                matrix[j, n - 1] = diff[other].mean() / inside
    return {
        "leakage": leakage.tolist(),
        "max_leakage": float(np.max(leakage)),
        "matrix": matrix.tolist(),
        "region_of_attribute": list(spec.topology.region_of_attribute),
    }


def interpolation_eval(manifest: DatasetManifest, field: Field, sidecar: dict,
                       render_samples: int = RENDER_SAMPLES,
                       max_frames: int | None = None) -> QualityReport:
    """Held-out frames rendered from neighbor-interpolated conditioning.

    The checkpoint records which manifest frames it trained on; every other
    frame is rendered with latent codes (and, matching the teacher-forced
    training input, attribute labels) linearly interpolated between its
    nearest trained neighbors, then scored against ground truth.
    """
    trained = sidecar.get("trained_frames")
    if trained is None:
        raise ConfigurationError("checkpoint sidecar lacks trained_frames")
    trained_pos = {f: i for i, f in enumerate(trained)}
    w, h = manifest.image_size

    omega = field.params["codes.omega"].data
    psi = field.params["codes.psi"].data

    report = QualityReport(frame_indices=[], psnr_values=[], ms_ssim_values=[])
    held_out = [rec for rec in manifest.records if rec.frame_index not in trained_pos]
    if max_frames is not None:
        held_out = held_out[:max_frames]
    for rec in held_out:
        before = [f for f in trained if f < rec.frame_index]
        after = [f for f in trained if f > rec.frame_index]
        if before and after:
            a, b = before[-1], after[0]
            t = (rec.frame_index - a) / (b - a)
            om = (1 - t) * omega[trained_pos[a]] + t * omega[trained_pos[b]]
            ps = (1 - t) * psi[trained_pos[a]] + t * psi[trained_pos[b]]
            rec_a = next(r for r in manifest.records if r.frame_index == a)
            rec_b = next(r for r in manifest.records if r.frame_index == b)
            alphas = (1 - t) * rec_a.attributes + t * rec_b.attributes
        else:
            nearest = before[-1] if before else after[0]
            om = omega[trained_pos[nearest]]
            ps = psi[trained_pos[nearest]]
            alphas = next(r for r in manifest.records
                          if r.frame_index == nearest).attributes
        camera = CameraModel(rec.intrinsics, rec.world_from_camera, w, h,
                             manifest.near, manifest.far)
        out = render_image(field, camera, alphas, omega=om, psi=ps,
                           samples_per_ray=render_samples, stratified=False)
        gt = load_color_png(rec.image_path)
        report.frame_indices.append(rec.frame_index)
        report.psnr_values.append(psnr(out["color"], gt))
        report.ms_ssim_values.append(ms_ssim(out["color"], gt))
    return report.finalize()


def training_view_eval(manifest: DatasetManifest, field: Field, sidecar: dict,
                       render_samples: int = RENDER_SAMPLES,
                       max_frames: int | None = None) -> QualityReport:
    """PSNR/MS-SSIM on trained frames with their own codes and labels."""
    trained = sidecar.get("trained_frames") or [r.frame_index for r in manifest.records]
    trained_pos = {f: i for i, f in enumerate(trained)}
    w, h = manifest.image_size
    report = QualityReport(frame_indices=[], psnr_values=[], ms_ssim_values=[])
    rows = [r for r in manifest.records if r.frame_index in trained_pos]
    if max_frames is not None:
        rows = rows[:: max(1, len(rows) // max_frames)][:max_frames]
    for rec in rows:
        i = trained_pos[rec.frame_index]
        camera = CameraModel(rec.intrinsics, rec.world_from_camera, w, h,
                             manifest.near, manifest.far)
        out = render_image(field, camera, rec.attributes,
                           omega=field.params["codes.omega"].data[i],
                           psi=field.params["codes.psi"].data[i],
                           samples_per_ray=render_samples, stratified=False)
        gt = load_color_png(rec.image_path)
        report.frame_indices.append(rec.frame_index)
        report.psnr_values.append(psnr(out["color"], gt))
        report.ms_ssim_values.append(ms_ssim(out["color"], gt))
    return report.finalize()


def normalized_track_from_csv(csv_path, sidecar: dict, sg_window: int = 31,
                              sg_order: int = 3) -> tuple[np.ndarray, list[str]]:
    """Source AU track -> smoothed -> normalized with the TARGET's constants.

    Attributes are matched by name against the sidecar's attribute list; a
    missing source column pins that attribute to 0 with a warning.
    """
    frames = ingest_tracking_csv(csv_path)
    if sg_window > len(frames):
        sg_window = len(frames) if len(frames) % 2 == 1 else len(frames) - 1
        sg_window = max(sg_window, sg_order + 1 + (sg_order % 2 == 0))
    frames = smooth_au_tracks(frames, sg_window, sg_order)
    track = np.stack([f.aus for f in frames])

    names = sidecar["attribute_names"]
    au_min = np.asarray(sidecar["au_min"], dtype=np.float64)
    au_max = np.asarray(sidecar["au_max"], dtype=np.float64)
    alpha = float(sidecar["alpha"])
    source_names = [c[:-2] for c in AU_COLUMNS]  # strip "_r"

    out = np.zeros((len(track), len(names)))
    warned = []
    for j, name in enumerate(names):
        if name in source_names:
            col = source_names.index(name)
            out[:, j] = normalize_au(track[:, col], au_min[j], au_max[j], alpha)
        else:
            warned.append(name)
    if warned:
        log.warning("source track lacks attributes %s; pinned to 0", warned)
    return out, warned


def transfer_expressions(csv_path, field: Field, sidecar: dict,
                         image_size: int | None = None,
                         render_samples: int = RENDER_SAMPLES,
                         sg_window: int = 31, sg_order: int = 3,
                         orbit: bool = False,
                         max_frames: int | None = None) -> dict:
    """Drive the trained field with a source sequence's attribute track."""
    spec = _scene_from_sidecar(sidecar)
    size = image_size or sidecar.get("image_size", [64, 64])[0]
    track, missing = normalized_track_from_csv(csv_path, sidecar, sg_window, sg_order)
    if max_frames is not None:
        track = track[:max_frames]

    fixed_camera = best_view(spec, size, size)
    frames = []
    for i, alphas in enumerate(track):
        camera = (scene_camera(spec, 2 * np.pi * i / len(track), size, size)
                  if orbit else fixed_camera)
        out = control_render(field, camera, alphas, samples=render_samples)
        frames.append(out["color"])
    return {"frames": frames, "track": track, "missing_attributes": missing,
            "camera": fixed_camera}
