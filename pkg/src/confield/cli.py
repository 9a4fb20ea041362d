"""Command-line entry point.

Subcommands: preprocess, synth-gen, train, render, eval {icc,decouple,
interp,transfer}, serve. Exit codes: 0 success, 1 usage error, 2 runtime
failure. Serve flags can be overridden by CONFIES_* environment variables.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

log = logging.getLogger("confield")


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _env(name: str, default):
    value = os.environ.get(f"CONFIES_{name}")
    if value is None:
        return default
    return type(default)(value) if default is not None else value


def build_parser() -> Parser:
    p = Parser(prog="confield",
               description="Controllable neural field: preprocess, train, "
                           "render, evaluate, serve.")
    sub = p.add_subparsers(dest="command", metavar="command")

    pp = sub.add_parser("preprocess", help="tracker CSV + images + poses -> manifest")
    pp.add_argument("--csv", required=True)
    pp.add_argument("--images", required=True)
    pp.add_argument("--poses", required=True)
    pp.add_argument("--out", required=True)
    pp.add_argument("--budget", type=int, default=750)
    pp.add_argument("--alpha", type=float, default=0.8)
    pp.add_argument("--sg-window", type=int, default=31)
    pp.add_argument("--sg-order", type=int, default=3)
    pp.add_argument("--levels", type=int, default=6)
    pp.add_argument("--seed", type=int, default=0)
    pp.add_argument("--near", type=float, default=0.2)
    pp.add_argument("--far", type=float, default=2.0)

    sg = sub.add_parser("synth-gen", help="generate the synthetic ground-truth dataset")
    sg.add_argument("--out", required=True)
    sg.add_argument("--frames", type=int, default=120)
    sg.add_argument("--size", type=int, default=64)
    sg.add_argument("--seed", type=int, default=0)
    sg.add_argument("--samples", type=int, default=160)

    tr = sub.add_parser("train", help="optimize the field against a manifest")
    tr.add_argument("--manifest", required=True)
    tr.add_argument("--config", help="flat key=value config file")
    tr.add_argument("--out-dir", required=True)

    rd = sub.add_parser("render", help="render a controlled view from a checkpoint")
    rd.add_argument("--checkpoint", required=True)
    rd.add_argument("--out", required=True, help="output path prefix")
    rd.add_argument("--attributes", default="", help="comma-separated control values")
    rd.add_argument("--azimuth", type=float, default=0.9)
    rd.add_argument("--elevation", type=float)
    rd.add_argument("--radius", type=float)
    rd.add_argument("--width", type=int)
    rd.add_argument("--height", type=int)
    rd.add_argument("--samples", type=int, default=96)
    rd.add_argument("--layers", default="color", help="any of color,mask,depth")
    rd.add_argument("--seed", type=int, default=0)

    ev = sub.add_parser("eval", help="quantitative evaluation protocols")
    evsub = ev.add_subparsers(dest="protocol", metavar="protocol")

    ei = evsub.add_parser("icc", help="attribute-control fidelity")
    ei.add_argument("--checkpoint", required=True)
    ei.add_argument("--out-dir", required=True)
    ei.add_argument("--grid", type=int, default=11)
    ei.add_argument("--samples", type=int, default=96)

    ed = evsub.add_parser("decouple", help="image-level leakage")
    ed.add_argument("--checkpoint", required=True)
    ed.add_argument("--out-dir", required=True)
    ed.add_argument("--samples", type=int, default=96)

    ep = evsub.add_parser("interp", help="held-out frame interpolation quality")
    ep.add_argument("--checkpoint", required=True)
    ep.add_argument("--manifest", required=True)
    ep.add_argument("--out-dir", required=True)
    ep.add_argument("--samples", type=int, default=96)
    ep.add_argument("--max-frames", type=int)
    ep.add_argument("--train-views", action="store_true",
                    help="also score the trained frames")

    et = evsub.add_parser("transfer", help="drive the avatar from a source CSV")
    et.add_argument("--checkpoint", required=True)
    et.add_argument("--source-csv", required=True)
    et.add_argument("--out-dir", required=True)
    et.add_argument("--sg-window", type=int, default=31)
    et.add_argument("--sg-order", type=int, default=3)
    et.add_argument("--samples", type=int, default=96)
    et.add_argument("--orbit", action="store_true")
    et.add_argument("--max-frames", type=int)

    sv = sub.add_parser("serve", help="HTTP render service")
    sv.add_argument("--checkpoint", default=_env("CHECKPOINT", None))
    sv.add_argument("--bind", default=_env("BIND", "127.0.0.1:8080"))
    sv.add_argument("--max-dim", type=int, default=_env("MAX_DIM", 512))
    sv.add_argument("--workers", type=int, default=_env("WORKERS", 4))
    return p


def _load_checkpoint(path):
    from .field import read_checkpoint

    return read_checkpoint(path)


def cmd_preprocess(args) -> int:
    from .facs.pipeline import preprocess

    path = preprocess(args.csv, args.images, args.poses, args.out,
                      budget=args.budget, alpha=args.alpha,
                      sg_window=args.sg_window, sg_order=args.sg_order,
                      levels=args.levels, seed=args.seed,
                      near=args.near, far=args.far)
    print(path)
    return 0


def cmd_synth_gen(args) -> int:
    from .synthetic import default_scene_spec, generate_dataset

    path = generate_dataset(default_scene_spec(), n_frames=args.frames,
                            out_dir=args.out, image_size=args.size,
                            seed=args.seed, samples_per_ray=args.samples)
    print(path)
    return 0


def cmd_train(args) -> int:
    from .facs import read_dataset_manifest
    from .reporting import write_training_curves
    from .training import Trainer, desk_preset, parse_config_file

    manifest = read_dataset_manifest(args.manifest)
    config = parse_config_file(args.config) if args.config else desk_preset()
    trainer = Trainer(manifest, config, args.out_dir)
    ckpt = trainer.train()
    write_training_curves(Path(args.out_dir) / "metrics.csv", args.out_dir)
    print(ckpt)
    return 0


def cmd_render(args) -> int:
    from .render.camera import orbit_camera
    from .render.images import (
        render_image,
        save_color_png,
        save_depth_png,
        save_mask_pngs,
    )

    field, sidecar = _load_checkpoint(args.checkpoint)
    defaults = _camera_defaults(sidecar)

    k = field.config.num_attributes
    alphas = np.zeros(k)
    if args.attributes:
        values = [float(v) for v in args.attributes.split(",")]
        if len(values) > k:
            raise UsageError(f"got {len(values)} attributes, model has {k}")
        alphas[:len(values)] = values
    if np.any(np.abs(alphas) > 1.0):
        log.warning("attributes outside [-1, 1] are clamped")
        alphas = np.clip(alphas, -1.0, 1.0)

    size = sidecar.get("image_size", [64, 64])
    width = args.width or size[0]
    height = args.height or size[1]
    camera = orbit_camera(
        args.azimuth,
        args.elevation if args.elevation is not None else defaults["elevation"],
        args.radius if args.radius is not None else defaults["radius"],
        width, height,
        focal=width * defaults["focal_per_pixel"],
        near=defaults["near"], far=defaults["far"],
    )
    out = render_image(field, camera, alphas, samples_per_ray=args.samples,
                       stratified=False, seed=args.seed)
    layers = [l.strip() for l in args.layers.split(",") if l.strip()]
    for layer in layers:
        if layer == "color":
            save_color_png(out["color"], f"{args.out}_color.png")
        elif layer == "mask":
            save_mask_pngs(out["masks"], args.out)
        elif layer == "depth":
            save_depth_png(out["depth"], f"{args.out}_depth.png")
        else:
            raise UsageError(f"unknown layer {layer!r}")
    print(args.out)
    return 0


def _camera_defaults(sidecar: dict) -> dict:
    from .synthetic.scene import BlobSceneSpec

    if sidecar.get("scene_spec"):
        spec = BlobSceneSpec.from_dict(sidecar["scene_spec"])
        return {"elevation": spec.orbit_elevation, "radius": spec.orbit_radius,
                "focal_per_pixel": spec.focal_per_pixel,
                "near": spec.near, "far": spec.far}
    return {"elevation": 0.35, "radius": 4.0, "focal_per_pixel": 1.2,
            "near": sidecar.get("near", 1.0), "far": sidecar.get("far", 6.0)}


def cmd_eval(args) -> int:
    if not getattr(args, "protocol", None):
        raise UsageError("eval requires a protocol: icc, decouple, interp, transfer")
    field, sidecar = _load_checkpoint(args.checkpoint)

    if args.protocol == "icc":
        from .evaluation import icc_protocol
        from .reporting import write_icc_report

        report = icc_protocol(field, sidecar, grid_points=args.grid,
                              render_samples=args.samples)
        write_icc_report(report, args.out_dir)
        print(f"mean ICC: {report.mean_icc:.4f} over "
              f"{report.measurable_count} measurable attributes")
    elif args.protocol == "decouple":
        from .evaluation import decoupling_score
        from .reporting import write_decoupling_report

        result = decoupling_score(field, sidecar, render_samples=args.samples)
        write_decoupling_report(result, args.out_dir,
                                attribute_names=sidecar.get("attribute_names"))
        print(f"max leakage: {result['max_leakage']:.5f}")
    elif args.protocol == "interp":
        from .evaluation import interpolation_eval, training_view_eval
        from .facs import read_dataset_manifest
        from .reporting import write_quality_report

        manifest = read_dataset_manifest(args.manifest)
        report = interpolation_eval(manifest, field, sidecar,
                                    render_samples=args.samples,
                                    max_frames=args.max_frames)
        write_quality_report(report, args.out_dir, "interpolation")
        print(f"held-out: PSNR {report.mean_psnr:.2f} dB, "
              f"MS-SSIM {report.mean_ms_ssim:.4f}")
        if args.train_views:
            tv = training_view_eval(manifest, field, sidecar,
                                    render_samples=args.samples,
                                    max_frames=args.max_frames)
            write_quality_report(tv, args.out_dir, "train_views")
            print(f"training views: PSNR {tv.mean_psnr:.2f} dB, "
                  f"MS-SSIM {tv.mean_ms_ssim:.4f}")
    elif args.protocol == "transfer":
        from .evaluation import transfer_expressions
        from .reporting import write_transfer_report

        result = transfer_expressions(args.source_csv, field, sidecar,
                                      render_samples=args.samples,
                                      sg_window=args.sg_window,
                                      sg_order=args.sg_order,
                                      orbit=args.orbit,
                                      max_frames=args.max_frames)
        write_transfer_report(result, args.out_dir,
                              sidecar.get("attribute_names", []))
        print(f"rendered {len(result['frames'])} transfer frames")
    return 0


def cmd_serve(args) -> int:
    from .service import serve

    if not args.checkpoint:
        raise UsageError("serve requires --checkpoint (or CONFIES_CHECKPOINT)")
    serve(args.checkpoint, bind=args.bind, max_dim=args.max_dim,
          workers=args.workers)
    return 0


COMMANDS = {
    "preprocess": cmd_preprocess,
    "synth-gen": cmd_synth_gen,
    "train": cmd_train,
    "render": cmd_render,
    "eval": cmd_eval,
    "serve": cmd_serve,
}


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("CONFIES_LOG", "INFO"),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            parser.print_usage(sys.stderr)
            return 1
        return COMMANDS[args.command](args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 130
    except Exception as e:  # runtime failure
        log.error("%s: %s", type(e).__name__, e)
        return 2


if __name__ == "__main__":
    sys.exit(main())
