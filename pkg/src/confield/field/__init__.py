"""The controllable neural scene field and its checkpoint format."""

from .checkpoint import read_checkpoint, sidecar_path, write_checkpoint
from .config import FieldConfig
from .model import Field, FieldOutput

__all__ = [
    "Field",
    "FieldConfig",
    "FieldOutput",
    "read_checkpoint",
    "sidecar_path",
    "write_checkpoint",
]
