"""AU intensity normalization into the control range [-1, 1]."""

from __future__ import annotations

import numpy as np

from ..errors import DegenerateRangeError

DEFAULT_ALPHA = 0.8


def normalize_au(au, au_min: float, au_max: float, alpha: float = DEFAULT_ALPHA):
    """Map raw intensity to [-1, 1] with an adjusted effective maximum.

    value = (au - au_min) / (alpha * au_max - au_min) * 2 - 1, clamped to 1
    from above (values beyond alpha*au_max saturate) and to -1 from below.
    Accepts scalars or arrays.
    """
    if not 0.0 < alpha <= 1.0:
        raise DegenerateRangeError(f"alpha must be in (0, 1], got {alpha}")
    denom = alpha * au_max - au_min
    if denom <= 0.0:
        raise DegenerateRangeError(
            f"alpha*au_max ({alpha * au_max:g}) must exceed au_min ({au_min:g})")
    value = (np.asarray(au, dtype=np.float64) - au_min) / denom * 2.0 - 1.0
    value = np.minimum(value, 1.0)
    value = np.maximum(value, -1.0)
    if np.isscalar(au):
        return float(value)
    return value


def denormalize_au(value, au_min: float, au_max: float, alpha: float = DEFAULT_ALPHA):
    """Inverse of normalize_au on the non-saturated branch."""
    denom = alpha * au_max - au_min
    if denom <= 0.0:
        raise DegenerateRangeError(
            f"alpha*au_max ({alpha * au_max:g}) must exceed au_min ({au_min:g})")
    return (np.asarray(value, dtype=np.float64) + 1.0) / 2.0 * denom + au_min
