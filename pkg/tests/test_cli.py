"""CLI dispatch, exit codes, and the scripted end-to-end smoke path."""

import json

import numpy as np
import pytest

from confield.cli import main

from .face_fixtures import canonical_landmarks, tracking_csv_text


def test_unknown_subcommand_exits_1(capsys):
    assert main(["frobnicate"]) == 1
    assert "usage" in capsys.readouterr().err.lower()


def test_no_subcommand_exits_1(capsys):
    assert main([]) == 1


def test_render_requires_checkpoint(capsys):
    assert main(["render", "--out", "/tmp/x"]) == 1
    assert "--checkpoint" in capsys.readouterr().err


def test_missing_checkpoint_is_runtime_error(tmp_path):
    assert main(["render", "--checkpoint", str(tmp_path / "none.cnfs"),
                 "--out", str(tmp_path / "o")]) == 2


def test_eval_without_protocol_exits_1(capsys):
    assert main(["eval"]) == 1


def test_full_happy_path(tmp_path, capsys):
    """synth-gen -> train -> render -> eval icc, all through the CLI."""
    data = tmp_path / "data"
    assert main(["synth-gen", "--out", str(data), "--frames", "6",
                 "--size", "16", "--seed", "1", "--samples", "32"]) == 0

    cfg = tmp_path / "train.cfg"
    cfg.write_text("iterations=6\nrays_per_batch=24\nsamples_per_ray=8\n"
                   "checkpoint_every=0\nlog_every=0\n")
    run = tmp_path / "run"
    assert main(["train", "--manifest", str(data / "manifest.json"),
                 "--config", str(cfg), "--out-dir", str(run)]) == 0
    ckpt = run / "model.cnfs"
    assert ckpt.exists()
    assert (run / "metrics.csv").exists()
    assert (run / "figures" / "training_curves.png").exists()

    assert main(["render", "--checkpoint", str(ckpt), "--out",
                 str(tmp_path / "frame"), "--attributes", "0.5,0,0,0,0,0",
                 "--width", "12", "--height", "12", "--samples", "8",
                 "--layers", "color,mask,depth"]) == 0
    assert (tmp_path / "frame_color.png").exists()
    assert (tmp_path / "frame_depth.png").exists()
    assert (tmp_path / "frame_region0.png").exists()

    assert main(["eval", "icc", "--checkpoint", str(ckpt), "--out-dir",
                 str(tmp_path / "icc"), "--grid", "3", "--samples", "12"]) == 0
    report = json.loads((tmp_path / "icc" / "icc.json").read_text())
    assert "mean_icc" in report


def test_preprocess_cli(tmp_path):
    rng = np.random.default_rng(0)
    n = 40
    aus = np.zeros((n, 17))
    aus[:, 0] = np.clip(2.5 + 2.0 * np.sin(np.linspace(0, 6, n)), 0, 5)
    aus[:, 8] = np.clip(rng.uniform(0, 5, n), 0, 5)
    csv = tmp_path / "track.csv"
    csv.write_text(tracking_csv_text(aus))

    images = tmp_path / "images"
    images.mkdir()
    from PIL import Image

    for i in range(n):
        Image.new("RGB", (200, 200), (10, 20, 30)).save(images / f"{i:06d}.png")

    poses = [{"frame": i, "intrinsics": [[150.0, 0, 100], [0, 150.0, 100], [0, 0, 1]],
              "world_from_camera": np.eye(4).tolist()} for i in range(n)]
    poses_path = tmp_path / "poses.json"
    poses_path.write_text(json.dumps(poses))

    out = tmp_path / "dataset"
    assert main(["preprocess", "--csv", str(csv), "--images", str(images),
                 "--poses", str(poses_path), "--out", str(out),
                 "--budget", "12", "--sg-window", "7", "--sg-order", "2"]) == 0

    from confield.facs import read_dataset_manifest

    manifest = read_dataset_manifest(out / "manifest.json")
    assert len(manifest.records) == 12
    assert manifest.num_attributes == 17
    assert manifest.topology.num_regions == 3
    assert all(np.all(np.abs(r.attributes) <= 1.0) for r in manifest.records)
    # region masks were rasterized for each selected frame
    assert all((out / "masks" / f"{r.frame_index:06d}.png").exists()
               for r in manifest.records)


def test_preprocess_drops_out_of_bounds_landmarks(tmp_path, caplog):
    n = 20
    landmarks = np.tile(canonical_landmarks()[None], (n, 1, 1))
    landmarks[3, 10] = (600.0, 600.0)  # far outside a 200px image + 10% slack
    aus = np.zeros((n, 17))
    aus[:, 0] = np.linspace(0, 5, n)
    csv = tmp_path / "track.csv"
    csv.write_text(tracking_csv_text(aus, landmarks=landmarks))

    from PIL import Image

    images = tmp_path / "images"
    images.mkdir()
    for i in range(n):
        Image.new("RGB", (200, 200)).save(images / f"{i:06d}.png")
    poses = [{"frame": i, "intrinsics": [[100.0, 0, 100], [0, 100.0, 100], [0, 0, 1]],
              "world_from_camera": np.eye(4).tolist()} for i in range(n)]
    poses_path = tmp_path / "poses.json"
    poses_path.write_text(json.dumps(poses))

    from confield.facs import read_dataset_manifest
    from confield.facs.pipeline import preprocess

    with caplog.at_level("WARNING"):
        out = preprocess(csv, images, poses_path, tmp_path / "ds", budget=20,
                         sg_window=5, sg_order=2)
    manifest = read_dataset_manifest(out)
    assert all(r.frame_index != 3 for r in manifest.records)
    assert "landmarks outside" in caplog.text


def test_eval_transfer_cli(tmp_path, tiny_checkpoint_path):
    aus = np.zeros((8, 17))
    aus[:, 0] = np.linspace(0, 4, 8)
    csv = tmp_path / "source.csv"
    csv.write_text(tracking_csv_text(aus))
    assert main(["eval", "transfer", "--checkpoint", str(tiny_checkpoint_path),
                 "--source-csv", str(csv), "--out-dir", str(tmp_path / "tr"),
                 "--sg-window", "5", "--sg-order", "2", "--samples", "8",
                 "--max-frames", "4"]) == 0
    assert (tmp_path / "tr" / "frames" / "000000.png").exists()
    assert (tmp_path / "tr" / "track.csv").exists()
