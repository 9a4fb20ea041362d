"""Dataset manifest: the contract between preprocessing, training, and control.

The manifest stores per-frame assets plus the normalization constants, so a
trained model and any later control input agree on the same AU mapping.
Asset paths are stored relative to the manifest file.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import IntegrityError
from .regions import RegionTopology

MANIFEST_VERSION = 1


@dataclass
class FrameRecord:
    """One training observation."""

    frame_index: int
    image_path: str
    mask_path: str
    intrinsics: np.ndarray        # (3, 3)
    world_from_camera: np.ndarray  # (4, 4)
    attributes: np.ndarray        # (K,) in [-1, 1]
    delta: np.ndarray             # (K,) supervision indicators in {0, 1}
    latent_index: int
    timestamp: float = 0.0


@dataclass
class DatasetManifest:
    records: list[FrameRecord]
    topology: RegionTopology
    attribute_names: tuple[str, ...]
    au_min: np.ndarray
    au_max: np.ndarray
    alpha: float
    image_size: tuple[int, int]   # (width, height)
    near: float
    far: float
    synthetic: bool = False
    scene_spec: dict | None = None
    extras: dict = field(default_factory=dict)

    @property
    def num_attributes(self) -> int:
        return len(self.attribute_names)


def write_dataset_manifest(manifest: DatasetManifest, path) -> None:
    """Serialize to JSON; paths are relativized against the manifest dir."""
    path = Path(path)
    base = path.parent.resolve()

    def rel(p: str) -> str:
        return os.path.relpath(Path(p).resolve(), base)

    doc = {
        "version": MANIFEST_VERSION,
        "attribute_names": list(manifest.attribute_names),
        "topology": {
            "num_regions": manifest.topology.num_regions,
            "region_of_attribute": list(manifest.topology.region_of_attribute),
        },
        "au_min": np.asarray(manifest.au_min, dtype=float).tolist(),
        "au_max": np.asarray(manifest.au_max, dtype=float).tolist(),
        "alpha": manifest.alpha,
        "image_size": list(manifest.image_size),
        "near": manifest.near,
        "far": manifest.far,
        "synthetic": manifest.synthetic,
        "scene_spec": manifest.scene_spec,
        "extras": manifest.extras,
        "frames": [
            {
                "frame_index": r.frame_index,
                "image": rel(r.image_path),
                "mask": rel(r.mask_path),
                "intrinsics": np.asarray(r.intrinsics, dtype=float).tolist(),
                "world_from_camera": np.asarray(r.world_from_camera, dtype=float).tolist(),
                "attributes": np.asarray(r.attributes, dtype=float).tolist(),
                "delta": np.asarray(r.delta, dtype=float).tolist(),
                "latent_index": r.latent_index,
                "timestamp": r.timestamp,
            }
            for r in manifest.records
        ],
    }
    with open(path, "w") as f:
        json.dump(doc, f, indent=1)


def read_dataset_manifest(path, check_assets: bool = True) -> DatasetManifest:
    """Parse and validate a manifest.

    Raises IntegrityError listing missing asset paths, and rejects attribute
    values outside [-1, 1].
    """
    path = Path(path)
    with open(path) as f:
        doc = json.load(f)
    base = path.parent

    topology = RegionTopology(
        doc["topology"]["num_regions"],
        tuple(doc["topology"]["region_of_attribute"]),
    )
    records = []
    missing: list[str] = []
    for fr in doc["frames"]:
        image_path = str(base / fr["image"])
        mask_path = str(base / fr["mask"])
        attributes = np.asarray(fr["attributes"], dtype=np.float64)
        if np.any(attributes < -1.0) or np.any(attributes > 1.0):
            raise IntegrityError(
                f"frame {fr['frame_index']}: attribute values outside [-1, 1]: "
                f"{attributes.tolist()}")
        if check_assets:
            for p in (image_path, mask_path):
                if not os.path.exists(p):
                    missing.append(p)
        records.append(FrameRecord(
            frame_index=int(fr["frame_index"]),
            image_path=image_path,
            mask_path=mask_path,
            intrinsics=np.asarray(fr["intrinsics"], dtype=np.float64),
            world_from_camera=np.asarray(fr["world_from_camera"], dtype=np.float64),
            attributes=attributes,
            delta=np.asarray(fr["delta"], dtype=np.float64),
            latent_index=int(fr["latent_index"]),
            timestamp=float(fr.get("timestamp", 0.0)),
        ))
    if missing:
        raise IntegrityError("manifest references missing assets: " + ", ".join(missing))

    return DatasetManifest(
        records=records,
        topology=topology,
        attribute_names=tuple(doc["attribute_names"]),
        au_min=np.asarray(doc["au_min"], dtype=np.float64),
        au_max=np.asarray(doc["au_max"], dtype=np.float64),
        alpha=float(doc["alpha"]),
        image_size=tuple(doc["image_size"]),
        near=float(doc["near"]),
        far=float(doc["far"]),
        synthetic=bool(doc.get("synthetic", False)),
        scene_spec=doc.get("scene_spec"),
        extras=doc.get("extras", {}),
    )
