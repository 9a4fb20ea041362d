"""Losses, training configuration, and the optimization loop."""

from .config import TrainConfig, desk_preset, paper_preset, parse_config_file
from .loop import Trainer, train
from .losses import attribute_loss, latent_reg_loss, mask_loss, recon_loss, total_loss

__all__ = [
    "TrainConfig",
    "Trainer",
    "attribute_loss",
    "desk_preset",
    "latent_reg_loss",
    "mask_loss",
    "paper_preset",
    "parse_config_file",
    "recon_loss",
    "total_loss",
    "train",
]
