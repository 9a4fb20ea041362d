"""Multilayer perceptrons and positional encoding on the autodiff tape."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionError
from .tensor import Tensor, concat, default_dtype, stack

_ACTIVATIONS = ("relu", "tanh", "none")


@dataclass(frozen=True)
class MlpSpec:
    """Architecture of one fully-connected network.

    `widths` lists every layer's output width (hidden layers plus the final
    layer); `activations` names the nonlinearity applied after each. A skip
    connection, when set, concatenates the network input onto the features
    entering layer `skip_at` (0-based).
    """

    name: str
    in_dim: int
    widths: tuple[int, ...]
    activations: tuple[str, ...]
    skip_at: int | None = None

    def __post_init__(self):
        if self.in_dim <= 0 or any(w <= 0 for w in self.widths):
            raise DimensionError(f"{self.name}: layer widths must be positive")
        if len(self.widths) != len(self.activations):
            raise DimensionError(f"{self.name}: need one activation per layer")
        for a in self.activations:
            if a not in _ACTIVATIONS:
                raise DimensionError(f"{self.name}: unknown activation {a!r}")
        if self.skip_at is not None and not (0 < self.skip_at < len(self.widths)):
            raise DimensionError(f"{self.name}: skip index {self.skip_at} out of range")

    @property
    def out_dim(self) -> int:
        return self.widths[-1]

    def layer_in_dim(self, i: int) -> int:
        d = self.in_dim if i == 0 else self.widths[i - 1]
        if self.skip_at == i:
            d += self.in_dim
        return d


def mlp(name: str, in_dim: int, hidden: tuple[int, ...], out_dim: int,
        out_activation: str = "none", skip_at: int | None = None) -> MlpSpec:
    """Convenience constructor: relu hidden layers plus one output layer."""
    widths = tuple(hidden) + (out_dim,)
    acts = ("relu",) * len(hidden) + (out_activation,)
    return MlpSpec(name, in_dim, widths, acts, skip_at)


def init_mlp(spec: MlpSpec, rng: np.random.Generator,
             final_scale: float = 1.0) -> dict[str, Tensor]:
    """Glorot-uniform weights, zero biases.

    `final_scale` shrinks the last layer (mask/density heads start near
    uniform masks and near-empty density).
    """
    params: dict[str, Tensor] = {}
    for i in range(len(spec.widths)):
        fan_in = spec.layer_in_dim(i)
        fan_out = spec.widths[i]
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        if i == len(spec.widths) - 1:
            w *= final_scale
        params[f"{spec.name}.W{i}"] = Tensor(w.astype(default_dtype()), requires_grad=True)
        params[f"{spec.name}.b{i}"] = Tensor(
            np.zeros(fan_out, dtype=default_dtype()), requires_grad=True)
    return params


def mlp_forward(spec: MlpSpec, params: dict[str, Tensor], x: Tensor) -> Tensor:
    """Run the network; input/output last dims must match the spec."""
    if x.shape[-1] != spec.in_dim:
        raise DimensionError(
            f"{spec.name}: input last dim {x.shape[-1]} != spec in_dim {spec.in_dim}")
    h = x
    for i, act in enumerate(spec.activations):
        if spec.skip_at == i:
            h = concat([h, x], axis=-1)
        h = h @ params[f"{spec.name}.W{i}"] + params[f"{spec.name}.b{i}"]
        if act == "relu":
            h = h.relu()
        elif act == "tanh":
            h = h.tanh()
    return h


def grouped_mlp_forward(specs: list[MlpSpec], params: dict[str, Tensor],
                        x: Tensor) -> Tensor:
    """Run several same-shaped networks as one batched computation.

    `x` is (G, B, in_dim) with one group per network; weights are stacked on
    the fly, so parameter layout and gradients stay per-network. Each group's
    output depends only on its own slice of the input. Returns (G, B, out).
    """
    base = specs[0]
    for s in specs[1:]:
        if s.widths != base.widths or s.in_dim != base.in_dim \
                or s.activations != base.activations or s.skip_at != base.skip_at:
            raise DimensionError("grouped networks must share one architecture")
    if x.ndim != 3 or x.shape[0] != len(specs) or x.shape[2] != base.in_dim:
        raise DimensionError(
            f"grouped input must be ({len(specs)}, B, {base.in_dim}), got {x.shape}")
    g = len(specs)
    h = x
    for i, act in enumerate(base.activations):
        if base.skip_at == i:
            h = concat([h, x], axis=-1)
        w = stack([params[f"{s.name}.W{i}"] for s in specs])
        b = stack([params[f"{s.name}.b{i}"] for s in specs]).reshape(g, 1, base.widths[i])
        h = h @ w + b
        if act == "relu":
            h = h.relu()
        elif act == "tanh":
            h = h.tanh()
    return h


def positional_encode(x: Tensor, num_frequencies: int, include_input: bool = True) -> Tensor:
    """Lift coordinates to [x?, sin(2^j x), cos(2^j x) for j < L].

    Output last dim is in_dim * (include_input + 2 * num_frequencies).
    """
    if num_frequencies < 0:
        raise DimensionError("num_frequencies must be >= 0")
    parts = [x] if include_input else []
    for j in range(num_frequencies):
        scaled = x * float(2.0 ** j)
        parts.append(scaled.sin())
        parts.append(scaled.cos())
    if not parts:
        raise DimensionError("encoding with no frequencies and no passthrough is empty")
    if len(parts) == 1:
        return parts[0]
    return concat(parts, axis=-1)


def encoded_dim(in_dim: int, num_frequencies: int, include_input: bool = True) -> int:
    return in_dim * (int(include_input) + 2 * num_frequencies)
