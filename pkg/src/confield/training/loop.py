"""Ray-batch optimization of the field against the four-term objective."""

from __future__ import annotations

import csv
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from ..autodiff import (
    AdamState,
    DecaySchedule,
    adam_step,
    as_tensor,
    backward,
    gather_rows,
)
from ..errors import GradientNanError
from ..facs.manifest import DatasetManifest
from ..field import Field, FieldConfig, write_checkpoint
from ..render.camera import CameraModel, generate_rays, pixel_grid
from ..render.images import load_color_png, load_label_png
from ..render.integrate import interval_lengths, quadrature_weights, sample_depths
from .config import TrainConfig
from .losses import attribute_loss, latent_reg_loss, mask_loss, recon_loss, total_loss

log = logging.getLogger(__name__)

METRICS_COLUMNS = ("step", "L_recon", "L_reg", "L_mask", "L_attr", "lr", "w_attr")
NEUTRAL_BETA = 1.0  # uncertainty assigned to empty space when aggregating per ray
# Once w_attr has decayed below this, the uncertainty networks stop mattering
# (their gradient is scaled by w_attr); beta is pinned to 1 to save their cost.
ATTR_WEIGHT_CUTOFF = 1e-8


class Trainer:
    """Owns the field, optimizer, dataset tensors, and the metrics log."""

    def __init__(self, manifest: DatasetManifest, config: TrainConfig,
                 out_dir, field_config: FieldConfig | None = None):
        self.config = config
        self.manifest = manifest
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)

        records = list(manifest.records)
        if config.frame_subset == "even":
            records = records[0::2]
        elif config.frame_subset == "odd":
            records = records[1::2]
        self.records = records
        self.trained_frames = [r.frame_index for r in records]

        w, h = manifest.image_size
        n = len(records)
        self.images = np.empty((n, h, w, 3), dtype=np.float32)
        self.labels = np.empty((n, h, w), dtype=np.int16)
        self.origins = np.empty((n, 3), dtype=np.float32)
        self.dirs = np.empty((n, h, w, 3), dtype=np.float32)
        self.alphas_gt = np.empty((n, manifest.num_attributes), dtype=np.float32)
        self.delta = np.empty((n, manifest.num_attributes), dtype=np.float32)
        grid = pixel_grid(w, h)
        for i, rec in enumerate(records):
            self.images[i] = load_color_png(rec.image_path)
            self.labels[i] = load_label_png(rec.mask_path)
            cam = CameraModel(rec.intrinsics, rec.world_from_camera, w, h,
                              manifest.near, manifest.far)
            origins, dirs = generate_rays(cam, grid)
            self.origins[i] = origins[0]
            self.dirs[i] = dirs.reshape(h, w, 3)
            self.alphas_gt[i] = rec.attributes
            self.delta[i] = rec.delta
        self.height, self.width = h, w

        rng = np.random.default_rng(config.seed)
        cfg = field_config or FieldConfig.from_topology(manifest.topology)
        self.field = Field(cfg, num_frames=n, rng=rng)
        self.rng = rng

        self.lr_schedule = DecaySchedule(config.lr_initial, config.lr_final,
                                         config.iterations)
        self.w_attr_schedule = DecaySchedule(config.w_attr_initial, config.w_attr_final,
                                             config.iterations)
        self.adam = AdamState(self.field.params, self.lr_schedule)
        self.metrics_rows: list[dict] = []

    # -- batching ----------------------------------------------------------

    def sample_batch(self) -> dict:
        """Rays drawn uniformly over all labeled pixels of the subset."""
        cfg = self.config
        n, h, w = self.images.shape[:3]
        flat = self.rng.integers(0, n * h * w, size=cfg.rays_per_batch)
        frame = flat // (h * w)
        pix = flat % (h * w)
        py, px = pix // w, pix % w
        return {
            "frame": frame.astype(np.int64),
            "origins": self.origins[frame],
            "dirs": self.dirs[frame, py, px],
            "gt_color": self.images[frame, py, px],
            "gt_label": self.labels[frame, py, px],
        }

    # -- one optimization step ------------------------------------------------

    def compute_losses(self, batch: dict, with_uncertainty: bool = True) -> dict:
        cfg = self.config
        r, s = cfg.rays_per_batch, cfg.samples_per_ray
        depths = sample_depths(self.manifest.near, self.manifest.far, r, s,
                               stratified=True, rng=self.rng)
        pts = batch["origins"][:, None, :] + depths[:, :, None] * batch["dirs"][:, None, :]
        frame_per_point = np.repeat(batch["frame"], s)
        out = self.field.query_train(
            as_tensor(pts.reshape(-1, 3)),
            as_tensor(np.repeat(batch["dirs"], s, axis=0)),
            frame_per_point,
            self.alphas_gt[frame_per_point],
            self.delta[frame_per_point],
            with_uncertainty=with_uncertainty,
            mask_override=(1.0 / (self.field.config.num_regions + 1)
                           if cfg.ablate_masks else None),
        )

        deltas = interval_lengths(depths, self.manifest.far)
        weights, _ = quadrature_weights(out.sigma.reshape(r, s), deltas)
        w3 = weights.reshape(r, s, 1)
        rgb = (w3 * out.color.reshape(r, s, 3)).sum(axis=1)
        opacity = weights.sum(axis=1)
        if any(c != 0.0 for c in cfg.background):
            bg = as_tensor(np.asarray(cfg.background, dtype=np.float32).reshape(1, 3))
            rgb = rgb + (1.0 - opacity).reshape(r, 1) * bg
        l_recon = recon_loss(rgb, batch["gt_color"])

        l_reg = latent_reg_loss([self.field.params["codes.omega"],
                                 self.field.params["codes.psi"]])

        # Mask loss sees the quadrature weights as constants (no density grad).
        w_const = weights.detach()
        mask_px = (w_const.reshape(r, s, 1) * out.masks.reshape(
            r, s, self.field.config.num_regions + 1)).sum(axis=1)
        l_mask = mask_loss(mask_px, w_const.data.sum(axis=1), batch["gt_label"],
                           cfg.focal_gamma)

        # Per-ray uncertainty render, neutral (1.0) in empty space, then
        # averaged per frame present in the batch.
        k = self.field.config.num_attributes
        beta_ray = (w3 * out.betas.reshape(r, s, k)).sum(axis=1) \
            + (1.0 - opacity).reshape(r, 1) * NEUTRAL_BETA
        uniq, inverse = np.unique(batch["frame"], return_inverse=True)
        avg = np.zeros((len(uniq), r), dtype=np.float32)
        avg[inverse, np.arange(r)] = 1.0
        avg /= avg.sum(axis=1, keepdims=True)
        beta_frame = as_tensor(avg) @ beta_ray
        alpha_pred = self.field.eval_attributes(
            gather_rows(self.field.params["codes.omega"], uniq))
        l_attr = attribute_loss(alpha_pred, self.alphas_gt[uniq], beta_frame,
                                self.delta[uniq])
        return {"recon": l_recon, "reg": l_reg, "mask": l_mask, "attr": l_attr}

    def step(self, iteration: int) -> dict:
        cfg = self.config
        w_attr = self.w_attr_schedule.value(iteration)
        with_uncertainty = w_attr >= ATTR_WEIGHT_CUTOFF
        if cfg.workers > 1:
            losses, grads = self._parallel_losses_and_grads(w_attr)
        else:
            losses = self.compute_losses(self.sample_batch(), with_uncertainty)
            loss = total_loss(losses["recon"], losses["reg"], losses["mask"],
                              losses["attr"], cfg.w_reg, cfg.w_mask, w_attr)
            if not np.isfinite(loss.data):
                raise GradientNanError(f"non-finite loss at step {iteration}")
            grads = backward(loss, self.field.params)
        adam_step(self.adam, self.field.params, grads, iteration)
        return {
            "step": iteration,
            "L_recon": float(losses["recon"].data),
            "L_reg": float(losses["reg"].data),
            "L_mask": float(losses["mask"].data),
            "L_attr": float(losses["attr"].data),
            "lr": self.lr_schedule.value(iteration),
            "w_attr": w_attr,
        }

    def _parallel_losses_and_grads(self, w_attr: float):
        """Per-worker ray chunks; gradients reduced in fixed chunk order.

        The attribute loss is normalized per (chunk, frame) instead of per
        frame, since chunks backpropagate independently.
        """
        cfg = self.config
        batches = [self.sample_batch() for _ in range(cfg.workers)]

        def run(batch):
            losses = self.compute_losses(batch)
            loss = total_loss(losses["recon"], losses["reg"], losses["mask"],
                              losses["attr"], cfg.w_reg / cfg.workers,
                              cfg.w_mask, w_attr)
            return losses, backward(loss, self.field.params)

        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(run, batches))  # list preserves chunk order
        total_grads = {k: np.zeros_like(p.data) for k, p in self.field.params.items()}
        agg = None
        for losses, grads in results:
            for k in total_grads:
                total_grads[k] += grads[k]
            if agg is None:
                agg = dict(losses)
            else:
                agg = {k: agg[k] + losses[k] for k in agg}
        return agg, total_grads

    # -- outer loop ------------------------------------------------------------

    def train(self) -> Path:
        """Run the configured number of iterations; returns the final
        checkpoint path. Aborts on NaN, dumping the last good parameters."""
        cfg = self.config
        started = time.time()
        final_path = self.out_dir / "model.cnfs"
        try:
            for it in range(cfg.iterations):
                row = self.step(it)
                self.metrics_rows.append(row)
                if cfg.log_every and it % cfg.log_every == 0:
                    per_ray = row["L_recon"] / cfg.rays_per_batch / max(1, cfg.workers)
                    log.info(
                        "step %d/%d recon=%.5f (per-ray %.6f) mask=%.3f attr=%.3f "
                        "lr=%.2e [%.1fs]",
                        it, cfg.iterations, row["L_recon"], per_ray, row["L_mask"],
                        row["L_attr"], row["lr"], time.time() - started)
                if cfg.checkpoint_every and it > 0 and it % cfg.checkpoint_every == 0:
                    self.save_checkpoint(self.out_dir / f"ckpt_{it:06d}.cnfs")
                    self.write_metrics()
        except GradientNanError:
            dump = self.out_dir / "last_good.cnfs"
            self.save_checkpoint(dump)
            self.write_metrics()
            log.exception("aborting: dumped last good parameters to %s", dump)
            raise
        self.save_checkpoint(final_path)
        self.write_metrics()
        return final_path

    def save_checkpoint(self, path) -> None:
        sidecar = {
            "attribute_names": list(self.manifest.attribute_names),
            "topology": {
                "num_regions": self.manifest.topology.num_regions,
                "region_of_attribute": list(self.manifest.topology.region_of_attribute),
            },
            "au_min": np.asarray(self.manifest.au_min, dtype=float).tolist(),
            "au_max": np.asarray(self.manifest.au_max, dtype=float).tolist(),
            "alpha": self.manifest.alpha,
            "image_size": list(self.manifest.image_size),
            "near": self.manifest.near,
            "far": self.manifest.far,
            "synthetic": self.manifest.synthetic,
            "scene_spec": self.manifest.scene_spec,
            "trained_frames": self.trained_frames,
            "train_config": self.config.to_dict(),
        }
        write_checkpoint(self.field, path, sidecar)

    def write_metrics(self) -> Path:
        path = self.out_dir / "metrics.csv"
        with open(path, "w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=METRICS_COLUMNS)
            writer.writeheader()
            writer.writerows(self.metrics_rows)
        return path


def train(manifest: DatasetManifest, config: TrainConfig, out_dir,
          field_config: FieldConfig | None = None) -> Path:
    """Convenience wrapper: build a Trainer and run it."""
    return Trainer(manifest, config, out_dir, field_config).train()
