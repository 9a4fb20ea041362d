"""Balanced frame sampling over AU-intensity blocks.

Uniform sampling of an expression capture keeps mostly-neutral frames; this
module instead services (AU, quantized-intensity) blocks smallest-first so
rare intensity levels survive downsampling.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..errors import ParameterError

log = logging.getLogger(__name__)

DEFAULT_LEVELS = 6


@dataclass(frozen=True)
class AuBlock:
    """Frames sharing one (AU index, quantized intensity level) pair."""

    au_index: int
    level: int
    members: tuple[int, ...]  # positions into the frame list


def quantize_levels(aus: np.ndarray, levels: int = DEFAULT_LEVELS,
                    max_intensity: float = 5.0) -> np.ndarray:
    """Round-half-up quantization of [0, max_intensity] into integer levels."""
    if levels < 2:
        raise ParameterError(f"levels must be >= 2, got {levels}")
    scaled = np.asarray(aus, dtype=np.float64) * (levels - 1) / max_intensity
    return np.clip(np.floor(scaled + 0.5).astype(int), 0, levels - 1)


def build_blocks(au_matrix: np.ndarray, levels: int = DEFAULT_LEVELS) -> list[AuBlock]:
    """All nonempty blocks for a (frames, aus) intensity matrix.

    Each (frame, AU) pair lands in exactly one block for that AU.
    """
    q = quantize_levels(au_matrix, levels)
    blocks = []
    for a in range(au_matrix.shape[1]):
        for lv in range(levels):
            members = np.nonzero(q[:, a] == lv)[0]
            if members.size:
                blocks.append(AuBlock(a, lv, tuple(int(m) for m in members)))
    return blocks


def balanced_sample(au_matrix: np.ndarray, budget: int,
                    levels: int = DEFAULT_LEVELS, seed: int = 0) -> list[int]:
    """Select `budget` frame positions, serving scarce blocks first.

    Blocks are sorted ascending by size and visited round-robin, taking one
    not-yet-selected frame per visit from a per-block shuffle that depends
    only on the seed. That makes the selection a prefix of one deterministic
    sequence, so growing the budget only ever adds frames.
    """
    n_frames = au_matrix.shape[0]
    if budget >= n_frames:
        if budget > n_frames:
            log.warning("budget %d exceeds %d distinct frames; keeping all", budget, n_frames)
        return list(range(n_frames))
    if budget <= 0:
        return []

    blocks = build_blocks(au_matrix, levels)
    blocks.sort(key=lambda b: (len(b.members), b.au_index, b.level))

    streams = []
    for b in blocks:
        rng = np.random.default_rng(np.random.SeedSequence([seed, b.au_index, b.level]))
        streams.append(iter(rng.permutation(b.members)))

    selected: set[int] = set()
    order: list[int] = []
    while len(order) < budget:
        progress = False
        for stream in streams:
            for frame in stream:
                if frame in selected:
                    continue
                selected.add(int(frame))
                order.append(int(frame))
                progress = True
                break
            if len(order) == budget:
                break
        if not progress:
            break
    return sorted(order)


def occupancy_imbalance(au_matrix: np.ndarray, selection,
                        levels: int = DEFAULT_LEVELS) -> float:
    """Max/min occupancy over the full track's nonempty blocks.

    A selection that leaves some block empty has infinite ratio; that case
    is scored as the dataset's largest block size, which bounds max/min for
    any selection that covers every block (occupancy can never exceed the
    largest block), so dropping a block is never rewarded.
    """
    blocks = build_blocks(au_matrix, levels)
    chosen = set(int(i) for i in selection)
    counts = np.array([len(chosen.intersection(b.members)) for b in blocks])
    if counts.size == 0:
        return 0.0
    min_c = int(counts.min())
    if min_c == 0:
        return float(max(len(b.members) for b in blocks))
    return int(counts.max()) / min_c
