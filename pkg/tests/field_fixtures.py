"""Small field instances shared across test modules."""

from __future__ import annotations

import numpy as np

from confield.field import Field, FieldConfig


def tiny_config(**overrides) -> FieldConfig:
    base = dict(
        num_attributes=4,
        num_regions=2,
        region_of_attribute=(1, 1, 2, 2),
        d_omega=4,
        d_psi=4,
        d_hyper=2,
        pe_spatial=3,
        pe_direction=2,
        pe_hyper=1,
        attr_hidden=(16, 16, 16),
        attr_skip=2,
        deform_hidden=(16,),
        slice_hidden=(16,),
        mask_hidden=(16,),
        uncert_hidden=(16,),
        template_hidden=(24, 24),
        template_skip=1,
        color_hidden=16,
    )
    base.update(overrides)
    return FieldConfig(**base)


def tiny_field(seed: int = 0, num_frames: int = 3, **overrides) -> Field:
    return Field(tiny_config(**overrides), num_frames=num_frames,
                 rng=np.random.default_rng(seed))


def random_inputs(rng: np.random.Generator, batch: int, config) -> dict:
    dirs = rng.normal(size=(batch, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return {
        "x": rng.uniform(-1, 1, size=(batch, 3)),
        "dirs": dirs,
        "alphas": rng.uniform(-1, 1, size=(batch, config.num_attributes)),
        "omega": rng.normal(size=(batch, config.d_omega)) * 0.1,
        "psi": rng.normal(size=(batch, config.d_psi)) * 0.1,
    }
