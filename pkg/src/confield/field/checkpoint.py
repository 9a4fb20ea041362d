"""Versioned binary checkpoints.

Layout: magic "CNFS", u32 format version, u32 header length, JSON header
(architecture plus parameter block names/shapes), then raw little-endian
float32 parameter data in declaration order. Dataset metadata (topology,
normalization constants, camera defaults) lives in a JSON sidecar next to
the binary.
"""

from __future__ import annotations

import dataclasses
import json
import struct
from pathlib import Path

import numpy as np

from ..autodiff import Tensor
from ..errors import FormatError
from .config import FieldConfig
from .model import Field

MAGIC = b"CNFS"
FORMAT_VERSION = 1


def sidecar_path(path) -> Path:
    return Path(str(path) + ".json")


def write_checkpoint(field: Field, path, sidecar: dict | None = None) -> None:
    names = field.parameter_names()
    header = {
        "config": dataclasses.asdict(field.config),
        "num_frames": field.num_frames,
        "blocks": [{"name": n, "shape": list(field.params[n].shape)} for n in names],
    }
    header_bytes = json.dumps(header).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", FORMAT_VERSION))
        f.write(struct.pack("<I", len(header_bytes)))
        f.write(header_bytes)
        for n in names:
            data = np.ascontiguousarray(field.params[n].data, dtype="<f4")
            f.write(data.tobytes())
    if sidecar is not None:
        with open(sidecar_path(path), "w") as f:
            json.dump(sidecar, f, indent=1)


def read_checkpoint(path) -> tuple[Field, dict]:
    """Rebuild a Field from disk; returns (field, sidecar-or-empty-dict)."""
    with open(path, "rb") as f:
        if f.read(4) != MAGIC:
            raise FormatError(f"{path}: not a CNFS checkpoint (bad magic)")
        (version,) = struct.unpack("<I", f.read(4))
        if version != FORMAT_VERSION:
            raise FormatError(f"{path}: unsupported checkpoint version {version}")
        (hlen,) = struct.unpack("<I", f.read(4))
        header = json.loads(f.read(hlen).decode("utf-8"))
        cfg_doc = header["config"]
        cfg_doc["region_of_attribute"] = tuple(cfg_doc["region_of_attribute"])
        for key, val in list(cfg_doc.items()):
            if isinstance(val, list):
                cfg_doc[key] = tuple(val)
        config = FieldConfig(**cfg_doc)
        field = Field(config, num_frames=header["num_frames"])
        for block in header["blocks"]:
            shape = tuple(block["shape"])
            count = int(np.prod(shape)) if shape else 1
            raw = f.read(4 * count)
            if len(raw) != 4 * count:
                raise FormatError(f"{path}: truncated block {block['name']!r}")
            data = np.frombuffer(raw, dtype="<f4").reshape(shape)
            field.params[block["name"]] = Tensor(data.copy(), requires_grad=True)

    sc = sidecar_path(path)
    sidecar = {}
    if sc.exists():
        with open(sc) as f:
            sidecar = json.load(f)
    return field, sidecar
