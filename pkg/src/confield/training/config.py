"""Training configuration, flat key=value config files, and presets."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

from ..errors import ParameterError


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 20_000
    rays_per_batch: int = 192
    samples_per_ray: int = 48
    lr_initial: float = 1e-3
    lr_final: float = 1e-4
    w_reg: float = 1e-4
    w_mask: float = 1e-2
    w_attr_initial: float = 0.1
    w_attr_final: float = 0.0
    focal_gamma: float = 2.0
    seed: int = 0
    checkpoint_every: int = 5_000
    log_every: int = 100
    frame_subset: str = "all"       # all | even | odd
    deterministic: bool = True
    workers: int = 1
    background: tuple[float, float, float] = (0.0, 0.0, 0.0)
    ablate_masks: bool = False      # force uniform masks (coupled-baseline mode)

    def __post_init__(self):
        if self.iterations <= 0 or self.rays_per_batch <= 0 or self.samples_per_ray < 2:
            raise ParameterError("iterations/rays/samples must be positive")
        if self.frame_subset not in ("all", "even", "odd"):
            raise ParameterError(f"unknown frame subset {self.frame_subset!r}")
        if self.workers < 1:
            raise ParameterError("workers must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


def paper_preset() -> TrainConfig:
    """The published full-scale recipe (not CPU-feasible; kept as reference)."""
    return TrainConfig(
        iterations=250_000,
        rays_per_batch=512,
        samples_per_ray=128,
        lr_initial=1e-4,
        lr_final=1e-5,
        w_reg=1e-4,
        w_mask=1e-2,
        w_attr_initial=0.1,
        w_attr_final=0.0,
    )


def desk_preset() -> TrainConfig:
    """CPU-scale defaults used by the acceptance run."""
    return TrainConfig()


_PRESETS = {"desk": desk_preset, "paper": paper_preset}


def parse_config_file(path) -> TrainConfig:
    """Read a flat key=value file; '#' starts a comment.

    A `preset=<name>` line selects the base config; other keys override it.
    """
    entries: dict[str, str] = {}
    with open(path) as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParameterError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, value = line.split("=", 1)
            entries[key.strip()] = value.strip()

    preset = entries.pop("preset", "desk")
    if preset not in _PRESETS:
        raise ParameterError(f"unknown preset {preset!r}; choose from {sorted(_PRESETS)}")
    base = _PRESETS[preset]().to_dict()

    casts = {f.name: f.type for f in fields(TrainConfig)}
    for key, value in entries.items():
        if key not in base:
            raise ParameterError(f"unknown config key {key!r}")
        kind = casts[key]
        if kind == "int":
            base[key] = int(value)
        elif kind == "float":
            base[key] = float(value)
        elif kind == "bool":
            base[key] = value.lower() in ("1", "true", "yes", "on")
        elif key == "background":
            base[key] = tuple(float(v) for v in value.split(","))
        else:
            base[key] = value
    base["background"] = tuple(base["background"])
    return TrainConfig(**base)
