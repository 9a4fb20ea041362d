"""Ingestion and temporal smoothing of face-tracker output.

The upstream tracker (OpenFace-compatible) emits one CSV row per video
frame: 68 2-D landmarks plus 17 action-unit intensities in [0, 5].
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.signal import savgol_filter

from ..errors import EmptyDatasetError, FormatError, ParameterError

log = logging.getLogger(__name__)

AU_NAMES = (
    "AU01", "AU02", "AU04", "AU05", "AU06", "AU07", "AU09", "AU10", "AU12",
    "AU14", "AU15", "AU17", "AU20", "AU23", "AU25", "AU26", "AU45",
)
AU_COLUMNS = tuple(f"{name}_r" for name in AU_NAMES)
NUM_LANDMARKS = 68
AU_MAX_INTENSITY = 5.0


@dataclass(frozen=True)
class TrackingFrame:
    """One tracked video frame: landmarks plus raw AU intensities."""

    index: int
    timestamp: float
    landmarks: np.ndarray  # (68, 2) pixel coordinates
    aus: np.ndarray        # (17,) intensities in [0, 5]
    success: bool = True


def ingest_tracking_csv(path) -> list[TrackingFrame]:
    """Parse a tracker CSV into frames, dropping failed detections.

    Required columns: frame, timestamp, success, x_0..x_67, y_0..y_67 and the
    17 AU intensity columns. AU values outside [0, 5] are clamped with a
    warning. Rows with success=0 are dropped and counted in the log.
    """
    df = pd.read_csv(path)
    df.columns = [c.strip() for c in df.columns]

    required = ["frame", "timestamp", "success"]
    required += [f"x_{i}" for i in range(NUM_LANDMARKS)]
    required += [f"y_{i}" for i in range(NUM_LANDMARKS)]
    required += list(AU_COLUMNS)
    for col in required:
        if col not in df.columns:
            raise FormatError(f"tracking CSV is missing column {col!r}")
    if len(df) == 0:
        raise EmptyDatasetError(f"tracking CSV {path} contains no rows")

    dropped = int((df["success"] == 0).sum())
    if dropped:
        log.info("dropping %d frames with detector success=0", dropped)
    df = df[df["success"] != 0].sort_values("frame")
    if len(df) == 0:
        raise EmptyDatasetError(f"tracking CSV {path}: no frames with success=1")

    xs = df[[f"x_{i}" for i in range(NUM_LANDMARKS)]].to_numpy(dtype=np.float64)
    ys = df[[f"y_{i}" for i in range(NUM_LANDMARKS)]].to_numpy(dtype=np.float64)
    aus = df[list(AU_COLUMNS)].to_numpy(dtype=np.float64)

    out_of_range = int(((aus < 0.0) | (aus > AU_MAX_INTENSITY)).sum())
    if out_of_range:
        log.warning("clamping %d AU values outside [0, %g]", out_of_range, AU_MAX_INTENSITY)
        aus = np.clip(aus, 0.0, AU_MAX_INTENSITY)

    frames = []
    for r, (idx, ts) in enumerate(zip(df["frame"].to_numpy(), df["timestamp"].to_numpy())):
        frames.append(TrackingFrame(
            index=int(idx),
            timestamp=float(ts),
            landmarks=np.stack([xs[r], ys[r]], axis=1),
            aus=aus[r].copy(),
        ))
    return frames


def smooth_au_tracks(frames: list[TrackingFrame], window: int,
                     poly_order: int) -> list[TrackingFrame]:
    """Savitzky-Golay smoothing of each AU channel over time.

    Edges use mirror padding; output is clamped back into [0, 5]. The frame
    list itself is not modified.
    """
    if window % 2 == 0:
        raise ParameterError(f"window must be odd, got {window}")
    if window <= poly_order:
        raise ParameterError(f"window {window} must exceed poly_order {poly_order}")
    if window > len(frames):
        raise ParameterError(f"window {window} larger than track length {len(frames)}")

    aus = np.stack([f.aus for f in frames], axis=0)
    smoothed = savgol_filter(aus, window, poly_order, axis=0, mode="mirror")
    smoothed = np.clip(smoothed, 0.0, AU_MAX_INTENSITY)
    return [
        TrackingFrame(f.index, f.timestamp, f.landmarks, smoothed[i].copy(), f.success)
        for i, f in enumerate(frames)
    ]
