"""Tracking ingestion, AU processing, and dataset assembly."""

from .manifest import (
    DatasetManifest,
    FrameRecord,
    read_dataset_manifest,
    write_dataset_manifest,
)
from .normalize import DEFAULT_ALPHA, denormalize_au, normalize_au
from .regions import (
    RegionMaskImage,
    RegionTopology,
    build_region_masks,
    default_au_topology,
    fill_polygon,
)
from .sampling import (
    AuBlock,
    balanced_sample,
    build_blocks,
    occupancy_imbalance,
    quantize_levels,
)
from .tracking import (
    AU_COLUMNS,
    AU_NAMES,
    TrackingFrame,
    ingest_tracking_csv,
    smooth_au_tracks,
)

__all__ = [
    "AU_COLUMNS",
    "AU_NAMES",
    "AuBlock",
    "DEFAULT_ALPHA",
    "DatasetManifest",
    "FrameRecord",
    "RegionMaskImage",
    "RegionTopology",
    "TrackingFrame",
    "balanced_sample",
    "build_blocks",
    "build_region_masks",
    "default_au_topology",
    "denormalize_au",
    "fill_polygon",
    "ingest_tracking_csv",
    "normalize_au",
    "occupancy_imbalance",
    "quantize_levels",
    "read_dataset_manifest",
    "smooth_au_tracks",
    "write_dataset_manifest",
]
