"""End-to-end preprocessing: tracker CSV + images + poses -> dataset manifest."""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np
from PIL import Image

from ..errors import FormatError, IntegrityError
from .manifest import DatasetManifest, FrameRecord, write_dataset_manifest
from .normalize import DEFAULT_ALPHA, normalize_au
from .regions import build_region_masks, default_au_topology
from .sampling import DEFAULT_LEVELS, balanced_sample
from .tracking import AU_NAMES, ingest_tracking_csv, smooth_au_tracks

log = logging.getLogger(__name__)


def load_poses(path) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    """Poses file: a JSON array of {frame, intrinsics, world_from_camera}."""
    with open(path) as f:
        doc = json.load(f)
    if not isinstance(doc, list):
        raise FormatError(f"{path}: expected a JSON array of pose entries")
    poses = {}
    for entry in doc:
        k = np.asarray(entry["intrinsics"], dtype=np.float64)
        pose = np.asarray(entry["world_from_camera"], dtype=np.float64)
        if k.shape != (3, 3) or pose.shape != (4, 4):
            raise FormatError(f"{path}: bad matrix shapes for frame {entry.get('frame')}")
        poses[int(entry["frame"])] = (k, pose)
    return poses


def frame_image_path(images_dir: Path, frame_index: int) -> Path:
    return Path(images_dir) / f"{frame_index:06d}.png"


def preprocess(csv_path, images_dir, poses_path, out_dir,
               budget: int = 750, alpha: float = DEFAULT_ALPHA,
               sg_window: int = 31, sg_order: int = 3,
               levels: int = DEFAULT_LEVELS, seed: int = 0,
               near: float = 0.2, far: float = 2.0) -> Path:
    """Build a balanced, normalized, mask-annotated dataset manifest.

    Per-AU min/max are computed after smoothing and before sampling so the
    normalization does not depend on the sampling budget.
    """
    out_dir = Path(out_dir)
    masks_dir = out_dir / "masks"
    masks_dir.mkdir(parents=True, exist_ok=True)
    images_dir = Path(images_dir)

    frames = ingest_tracking_csv(csv_path)
    frames = smooth_au_tracks(frames, sg_window, sg_order)
    track = np.stack([f.aus for f in frames])
    au_min = track.min(axis=0)
    au_max = track.max(axis=0)
    # AUs with no usable range (never activated in this capture) cannot be
    # normalized; they are pinned to rest intensity (-1).
    degenerate = alpha * au_max <= au_min
    if degenerate.any():
        log.warning("AUs with degenerate range pinned to -1: %s",
                    [AU_NAMES[i] for i in np.nonzero(degenerate)[0]])

    selected = balanced_sample(track, budget, levels=levels, seed=seed)
    log.info("selected %d of %d frames", len(selected), len(frames))

    poses = load_poses(poses_path)
    topology = default_au_topology(AU_NAMES)

    first_image = frame_image_path(images_dir, frames[selected[0]].index)
    if not first_image.exists():
        raise IntegrityError(f"missing image {first_image}")
    with Image.open(first_image) as im:
        width, height = im.size

    slack_x, slack_y = 0.1 * width, 0.1 * height
    records = []
    missing: list[str] = []
    latent = 0
    for pos in selected:
        frame = frames[pos]
        image_path = frame_image_path(images_dir, frame.index)
        if not image_path.exists():
            missing.append(str(image_path))
            continue
        if frame.index not in poses:
            missing.append(f"pose for frame {frame.index}")
            continue
        lm = frame.landmarks
        if (np.any(lm[:, 0] < -slack_x) or np.any(lm[:, 0] > width + slack_x)
                or np.any(lm[:, 1] < -slack_y) or np.any(lm[:, 1] > height + slack_y)):
            log.warning("frame %d: landmarks outside image bounds + 10%% slack; dropped",
                        frame.index)
            continue
        mask = build_region_masks(frame.landmarks, width, height, topology)
        mask_path = masks_dir / f"{frame.index:06d}.png"
        mask.save(mask_path)
        attributes = np.array([
            -1.0 if degenerate[a]
            else normalize_au(frame.aus[a], au_min[a], au_max[a], alpha)
            for a in range(len(AU_NAMES))
        ])
        intrinsics, pose = poses[frame.index]
        records.append(FrameRecord(
            frame_index=frame.index,
            image_path=str(image_path),
            mask_path=str(mask_path),
            intrinsics=intrinsics,
            world_from_camera=pose,
            attributes=attributes,
            delta=np.ones(len(AU_NAMES)),
            latent_index=latent,
            timestamp=frame.timestamp,
        ))
        latent += 1
    if missing:
        raise IntegrityError("preprocess inputs incomplete: " + ", ".join(missing[:10]))

    manifest = DatasetManifest(
        records=records,
        topology=topology,
        attribute_names=AU_NAMES,
        au_min=au_min,
        au_max=au_max,
        alpha=alpha,
        image_size=(width, height),
        near=near,
        far=far,
        synthetic=False,
        extras={"budget": budget, "sg_window": sg_window, "sg_order": sg_order,
                "levels": levels, "seed": seed},
    )
    manifest_path = out_dir / "manifest.json"
    write_dataset_manifest(manifest, manifest_path)
    return manifest_path
