"""Shared fixtures: a tiny synthetic dataset and a briefly-trained checkpoint."""

import numpy as np
import pytest

from confield.facs import read_dataset_manifest
from confield.field import FieldConfig, read_checkpoint
from confield.synthetic import default_scene_spec, generate_dataset
from confield.training import Trainer, TrainConfig


def small_field_config(manifest):
    return FieldConfig.from_topology(
        manifest.topology,
        d_omega=4, d_psi=4, pe_spatial=4, pe_direction=2, pe_hyper=1,
        attr_hidden=(16, 16, 16), attr_skip=2, deform_hidden=(16,),
        slice_hidden=(16,), mask_hidden=(16,), uncert_hidden=(8,),
        template_hidden=(32, 32), template_skip=1, color_hidden=16,
    )


@pytest.fixture(scope="session")
def tiny_dataset_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("tiny_synth")
    generate_dataset(default_scene_spec(), n_frames=10, out_dir=out,
                     image_size=24, seed=3, samples_per_ray=48)
    return out


@pytest.fixture(scope="session")
def tiny_manifest(tiny_dataset_dir):
    return read_dataset_manifest(tiny_dataset_dir / "manifest.json")


@pytest.fixture(scope="session")
def tiny_checkpoint_path(tiny_manifest, tmp_path_factory):
    out = tmp_path_factory.mktemp("tiny_run")
    cfg = TrainConfig(iterations=30, rays_per_batch=48, samples_per_ray=12,
                      frame_subset="even", checkpoint_every=0, log_every=0, seed=1)
    trainer = Trainer(tiny_manifest, cfg, out,
                      field_config=small_field_config(tiny_manifest))
    return trainer.train()


@pytest.fixture(scope="session")
def tiny_trained(tiny_manifest, tiny_checkpoint_path):
    field, sidecar = read_checkpoint(tiny_checkpoint_path)
    return tiny_manifest, field, sidecar
