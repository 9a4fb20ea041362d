"""Controllable neural radiance field for attribute-driven deformable scenes."""

__version__ = "0.1.0"
