"""Report rendering: JSON + CSV tables with matplotlib figures alongside.

Every evaluation subcommand writes its numbers twice (machine-readable JSON,
delimited CSV) and drops the matching figures into <out>/figures/.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluation.protocols import IccReport, QualityReport
from .render.images import save_color_png

FIG_DPI = 130

plt.rcParams.update({
    "figure.figsize": (6.0, 4.0),
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
})


def _prepare(out_dir) -> tuple[Path, Path]:
    out = Path(out_dir)
    figs = out / "figures"
    figs.mkdir(parents=True, exist_ok=True)
    return out, figs


def _write_json(path: Path, doc: dict) -> None:
    with open(path, "w") as f:
        json.dump(doc, f, indent=1)


def _save(fig, path: Path) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=FIG_DPI)
    plt.close(fig)


def write_icc_report(report: IccReport, out_dir) -> Path:
    out, figs = _prepare(out_dir)
    _write_json(out / "icc.json", report.to_dict())

    with open(out / "icc.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["attribute", "icc", "measurable"])
        for name, value in zip(report.attribute_names, report.per_attribute):
            writer.writerow([name, "" if value is None else f"{value:.6f}",
                             int(value is not None)])
        writer.writerow(["mean", f"{report.mean_icc:.6f}", report.measurable_count])

    fig, ax = plt.subplots()
    vals = [v if v is not None else 0.0 for v in report.per_attribute]
    ax.bar(range(len(vals)), vals, color="#4878cf")
    ax.axhline(report.mean_icc, color="#d65f5f", ls="--",
               label=f"mean {report.mean_icc:.3f}")
    ax.set_xticks(range(len(vals)))
    ax.set_xticklabels(report.attribute_names, rotation=45, ha="right")
    ax.set_ylabel("ICC(3,1)")
    ax.set_ylim(-0.1, 1.05)
    ax.legend()
    _save(fig, figs / "icc_bars.png")

    k = len(report.attribute_names)
    cols = min(3, k)
    rows = int(np.ceil(k / cols))
    fig, axes = plt.subplots(rows, cols, figsize=(3 * cols, 2.4 * rows), squeeze=False)
    for a in range(k):
        ax = axes[a // cols][a % cols]
        cmd = report.commanded[a]
        meas = [m if m is not None else np.nan for m in report.measured[a]]
        ax.plot(cmd, cmd, color="#999999", lw=1, label="commanded")
        ax.plot(cmd, meas, "o-", color="#4878cf", ms=3, label="measured")
        ax.set_title(report.attribute_names[a])
        ax.set_xlim(-1.05, 1.05)
        ax.set_ylim(-1.15, 1.15)
    axes[0][0].legend(fontsize=7)
    _save(fig, figs / "control_transitions.png")
    return out / "icc.json"


def write_decoupling_report(result: dict, out_dir,
                            attribute_names=None) -> Path:
    out, figs = _prepare(out_dir)
    _write_json(out / "decoupling.json", result)

    leakage = result["leakage"]
    names = list(attribute_names or range(len(leakage)))
    with open(out / "decoupling.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["attribute", "region", "leakage"])
        for name, region, value in zip(names, result["region_of_attribute"], leakage):
            writer.writerow([name, region, f"{value:.6f}"])

    matrix = np.asarray(result["matrix"])
    fig, ax = plt.subplots()
    im = ax.imshow(matrix, cmap="viridis", aspect="auto")
    ax.set_xlabel("region")
    ax.set_ylabel("attribute")
    ax.set_xticks(range(matrix.shape[1]))
    ax.set_xticklabels([f"R{n + 1}" for n in range(matrix.shape[1])])
    ax.set_yticks(range(len(names)))
    ax.set_yticklabels(names)
    fig.colorbar(im, label="|change| relative to own region")
    _save(fig, figs / "leakage_matrix.png")

    fig, ax = plt.subplots()
    ax.bar(range(len(leakage)), leakage, color="#4878cf")
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=45, ha="right")
    ax.set_ylabel("leakage ratio")
    _save(fig, figs / "leakage_bars.png")
    return out / "decoupling.json"


def write_quality_report(report: QualityReport, out_dir, name: str) -> Path:
    out, figs = _prepare(out_dir)
    _write_json(out / f"{name}.json", report.to_dict())

    with open(out / f"{name}.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["frame", "psnr_db", "ms_ssim"])
        for idx, p, s in zip(report.frame_indices, report.psnr_values,
                             report.ms_ssim_values):
            writer.writerow([idx, f"{p:.4f}", f"{s:.6f}"])
        writer.writerow(["mean", f"{report.mean_psnr:.4f}", f"{report.mean_ms_ssim:.6f}"])

    fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True)
    ax1.plot(report.frame_indices, report.psnr_values, "o-", ms=3, color="#4878cf")
    ax1.axhline(report.mean_psnr, color="#d65f5f", ls="--",
                label=f"mean {report.mean_psnr:.2f} dB")
    ax1.set_ylabel("PSNR (dB)")
    ax1.legend(fontsize=7)
    ax2.plot(report.frame_indices, report.ms_ssim_values, "o-", ms=3, color="#6acc65")
    ax2.axhline(report.mean_ms_ssim, color="#d65f5f", ls="--",
                label=f"mean {report.mean_ms_ssim:.4f}")
    ax2.set_ylabel("MS-SSIM")
    ax2.set_xlabel("frame")
    ax2.legend(fontsize=7)
    _save(fig, figs / f"{name}_quality.png")
    return out / f"{name}.json"


def write_transfer_report(result: dict, out_dir, attribute_names) -> Path:
    out, figs = _prepare(out_dir)
    frames_dir = out / "frames"
    frames_dir.mkdir(exist_ok=True)
    for i, frame in enumerate(result["frames"]):
        save_color_png(frame, frames_dir / f"{i:06d}.png")

    with open(out / "track.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["frame"] + list(attribute_names))
        for i, row in enumerate(result["track"]):
            writer.writerow([i] + [f"{v:.5f}" for v in row])
    _write_json(out / "transfer.json", {
        "num_frames": len(result["frames"]),
        "missing_attributes": result["missing_attributes"],
    })

    track = np.asarray(result["track"])
    fig, ax = plt.subplots()
    for j, name in enumerate(attribute_names):
        ax.plot(track[:, j], label=str(name), lw=1)
    ax.set_xlabel("frame")
    ax.set_ylabel("control value")
    ax.legend(fontsize=6, ncol=2)
    _save(fig, figs / "transfer_track.png")

    n = len(result["frames"])
    picks = np.linspace(0, n - 1, min(6, n)).astype(int)
    fig, axes = plt.subplots(1, len(picks), figsize=(2 * len(picks), 2.2))
    for ax, i in zip(np.atleast_1d(axes), picks):
        ax.imshow(np.clip(result["frames"][i], 0, 1))
        ax.set_title(f"frame {i}", fontsize=7)
        ax.axis("off")
    _save(fig, figs / "transfer_strip.png")
    return out / "transfer.json"


def write_training_curves(metrics_csv, out_dir) -> Path:
    out, figs = _prepare(out_dir)
    rows = list(csv.DictReader(open(metrics_csv)))
    if not rows:
        return figs / "training_curves.png"
    steps = [int(r["step"]) for r in rows]
    fig, axes = plt.subplots(2, 2, figsize=(9, 6))
    for ax, key, color in zip(
            axes.ravel(), ("L_recon", "L_mask", "L_attr", "lr"),
            ("#4878cf", "#6acc65", "#d65f5f", "#956cb4")):
        ax.plot(steps, [float(r[key]) for r in rows], color=color, lw=0.8)
        ax.set_title(key)
        if key != "lr" and len(rows) > 10:
            ax.set_yscale("log")
    path = figs / "training_curves.png"
    _save(fig, path)
    return path
