"""HTTP render service for interactive control.

Thread-per-request over a read-only checkpoint. Render work passes through a
bounded admission gate so /healthz always answers immediately and overload
sheds with 429. Identical requests produce byte-identical PNGs.
"""

from __future__ import annotations

import io
import json
import logging
import threading
import uuid
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
from PIL import Image

from .field import read_checkpoint
from .render.camera import CameraModel, orbit_camera
from .render.images import render_image, to_uint8
from .synthetic.scene import BlobSceneSpec

log = logging.getLogger(__name__)

DEFAULT_MAX_DIM = 512
DEFAULT_WORKERS = 4
PREVIEW_SCALE = 4
PREVIEW_SAMPLES = 16
FULL_SAMPLES = 96


class ServiceState:
    """Loaded checkpoint plus request accounting; checkpoint never mutates."""

    def __init__(self, checkpoint_path, max_dim: int = DEFAULT_MAX_DIM,
                 workers: int = DEFAULT_WORKERS):
        self.field, self.sidecar = read_checkpoint(checkpoint_path)
        self.max_dim = max_dim
        self.render_gate = threading.Semaphore(workers)
        self.counters = {"render": 0, "meta": 0, "rejected": 0}
        self.counter_lock = threading.Lock()

        k = self.field.config.num_attributes
        self.attribute_names = list(
            self.sidecar.get("attribute_names", [f"attr{i}" for i in range(k)]))
        if self.sidecar.get("scene_spec"):
            spec = BlobSceneSpec.from_dict(self.sidecar["scene_spec"])
            self.camera_defaults = {
                "azimuth": 0.9,
                "elevation": spec.orbit_elevation,
                "radius": spec.orbit_radius,
                "focal_per_pixel": spec.focal_per_pixel,
                "near": spec.near,
                "far": spec.far,
            }
        else:
            self.camera_defaults = {
                "azimuth": 0.0, "elevation": 0.35, "radius": 4.0,
                "focal_per_pixel": 1.2,
                "near": self.sidecar.get("near", 1.0),
                "far": self.sidecar.get("far", 6.0),
            }

    def bump(self, key: str) -> None:
        with self.counter_lock:
            self.counters[key] += 1

    def meta(self) -> dict:
        self.bump("meta")
        return {
            "num_attributes": self.field.config.num_attributes,
            "num_regions": self.field.config.num_regions,
            "attribute_names": self.attribute_names,
            "image_size": self.sidecar.get("image_size", [64, 64]),
            "camera_defaults": self.camera_defaults,
            "max_dim": self.max_dim,
        }


class RenderRequestError(ValueError):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status


def parse_render_request(doc: dict, state: ServiceState) -> dict:
    k = state.field.config.num_attributes
    raw = doc.get("attributes", [])
    if not isinstance(raw, list) or len(raw) > k \
            or not all(isinstance(v, (int, float)) for v in raw):
        raise RenderRequestError(400, f"attributes must be a list of <= {k} numbers")
    alphas = np.zeros(k)
    alphas[:len(raw)] = raw
    clamped = bool(np.any(alphas < -1.0) or np.any(alphas > 1.0))
    alphas = np.clip(alphas, -1.0, 1.0)

    width = int(doc.get("width", state.sidecar.get("image_size", [64, 64])[0]))
    height = int(doc.get("height", width))
    if width > state.max_dim or height > state.max_dim:
        raise RenderRequestError(413, f"dims {width}x{height} exceed max {state.max_dim}")
    if width < 4 or height < 4:
        raise RenderRequestError(400, "dims too small")

    preview = bool(doc.get("preview", False))
    if preview:
        width = max(4, width // PREVIEW_SCALE)
        height = max(4, height // PREVIEW_SCALE)

    cam_doc = doc.get("camera", {}) or {}
    if "intrinsics" in cam_doc or "world_from_camera" in cam_doc:
        try:
            camera = CameraModel(
                np.asarray(cam_doc["intrinsics"], dtype=np.float64),
                np.asarray(cam_doc["world_from_camera"], dtype=np.float64),
                width, height,
                float(cam_doc.get("near", state.camera_defaults["near"])),
                float(cam_doc.get("far", state.camera_defaults["far"])),
            )
        except Exception as e:
            raise RenderRequestError(400, f"bad explicit camera: {e}") from e
    else:
        d = state.camera_defaults
        camera = orbit_camera(
            float(cam_doc.get("azimuth", d["azimuth"])),
            float(cam_doc.get("elevation", d["elevation"])),
            float(cam_doc.get("radius", d["radius"])),
            width, height,
            focal=width * d["focal_per_pixel"],
            near=d["near"], far=d["far"],
        )

    layer = doc.get("layer", "color")
    if layer not in ("color", "mask", "depth"):
        raise RenderRequestError(400, f"unknown layer {layer!r}")
    region = doc.get("region")
    if region is not None:
        region = int(region)
        if not 0 <= region <= state.field.config.num_regions:
            raise RenderRequestError(400, f"region {region} out of range")

    return {
        "alphas": alphas,
        "camera": camera,
        "layer": layer,
        "region": region,
        "clamped": clamped,
        "samples": PREVIEW_SAMPLES if preview else int(doc.get("samples", FULL_SAMPLES)),
        "seed": int(doc.get("seed", 0)),
    }


def render_to_png(state: ServiceState, req: dict) -> tuple[bytes, dict[str, str]]:
    out = render_image(state.field, req["camera"], req["alphas"],
                       samples_per_ray=req["samples"], stratified=False,
                       seed=req["seed"])
    headers: dict[str, str] = {}
    if req["clamped"]:
        headers["Clamped"] = "true"

    layer = req["layer"]
    if layer == "color":
        img = Image.fromarray(to_uint8(out["color"]), mode="RGB")
    elif layer == "mask":
        masks = out["masks"]
        if req["region"] is not None:
            img = Image.fromarray(to_uint8(masks[..., req["region"]]), mode="L")
        else:
            # pack the first three region channels as RGB
            rgb = np.zeros(masks.shape[:2] + (3,), dtype=np.float32)
            n = min(3, masks.shape[-1] - 1)
            rgb[..., :n] = masks[..., 1:1 + n]
            img = Image.fromarray(to_uint8(rgb), mode="RGB")
    else:
        depth = out["depth"]
        lo, hi = float(depth.min()), float(depth.max())
        span = hi - lo if hi > lo else 1.0
        scaled = np.round((depth - lo) / span * 65535.0).astype(np.uint16)
        img = Image.fromarray(scaled)
        headers["X-Depth-Min"] = repr(lo)
        headers["X-Depth-Max"] = repr(hi)

    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue(), headers


class Handler(BaseHTTPRequestHandler):
    server_version = "confield"
    state: ServiceState  # set by make_server

    def log_message(self, fmt, *args):
        log.debug("http: " + fmt, *args)

    def _send(self, status: int, body: bytes, content_type: str,
              headers: dict | None = None) -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        for k, v in (headers or {}).items():
            self.send_header(k, v)
        self.end_headers()
        self.wfile.write(body)

    def _send_json(self, status: int, doc: dict, headers: dict | None = None) -> None:
        self._send(status, json.dumps(doc).encode(), "application/json", headers)

    def do_GET(self):
        if self.path == "/healthz":
            self._send(200, b"ok", "text/plain")
        elif self.path == "/meta":
            self._send_json(200, self.state.meta())
        else:
            self._send_json(404, {"error": f"no route {self.path}"})

    def do_OPTIONS(self):
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.end_headers()

    def do_POST(self):
        if self.path != "/render":
            self._send_json(404, {"error": f"no route {self.path}"})
            return
        try:
            length = int(self.headers.get("Content-Length", 0))
            doc = json.loads(self.rfile.read(length) or b"{}")
            if not isinstance(doc, dict):
                raise ValueError("request body must be a JSON object")
        except (ValueError, json.JSONDecodeError) as e:
            self._send_json(400, {"error": f"malformed JSON: {e}"})
            return

        try:
            req = parse_render_request(doc, self.state)
        except RenderRequestError as e:
            self._send_json(e.status, {"error": str(e)})
            return

        if not self.state.render_gate.acquire(blocking=False):
            self.state.bump("rejected")
            self._send_json(429, {"error": "render queue full; retry"})
            return
        try:
            png, headers = render_to_png(self.state, req)
            self.state.bump("render")
            self._send(200, png, "image/png", headers)
        except Exception:
            error_id = uuid.uuid4().hex[:12]
            log.exception("render failed (id %s)", error_id)
            self._send_json(500, {"error": "render failed", "id": error_id})
        finally:
            self.state.render_gate.release()


def make_server(checkpoint_path, host: str = "127.0.0.1", port: int = 8080,
                max_dim: int = DEFAULT_MAX_DIM,
                workers: int = DEFAULT_WORKERS) -> ThreadingHTTPServer:
    # Renders are long chains of numpy ops on one core; shorten the GIL
    # switch interval so /healthz preempts promptly during render work.
    import sys

    sys.setswitchinterval(1e-3)
    state = ServiceState(checkpoint_path, max_dim=max_dim, workers=workers)
    handler = type("BoundHandler", (Handler,), {"state": state})
    server = ThreadingHTTPServer((host, port), handler)
    server.state = state
    return server


def serve(checkpoint_path, bind: str = "127.0.0.1:8080",
          max_dim: int = DEFAULT_MAX_DIM, workers: int = DEFAULT_WORKERS) -> None:
    host, _, port = bind.partition(":")
    server = make_server(checkpoint_path, host or "127.0.0.1", int(port or 8080),
                         max_dim, workers)
    log.info("serving on http://%s:%d", *server.server_address)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
