"""Adam optimizer and exponential decay schedules."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionError, GradientNanError
from .tensor import Tensor

# Floor used in place of an exact zero endpoint: exponential decay can only
# approach zero, so a zero `final` is modeled as decay to ~1e-12 with the
# endpoint itself returned exactly.
_ZERO_FLOOR = 1e-12


@dataclass(frozen=True)
class DecaySchedule:
    """Exponential interpolation hitting both endpoints exactly."""

    initial: float
    final: float
    total_steps: int
    kind: str = "exponential"

    def __post_init__(self):
        if self.kind != "exponential":
            raise DimensionError(f"unknown schedule kind {self.kind!r}")
        if self.total_steps <= 0:
            raise DimensionError("total_steps must be positive")

    def value(self, step: int) -> float:
        if step <= 0:
            return self.initial
        if step >= self.total_steps:
            return self.final
        if self.initial == self.final:
            return self.initial
        lo = self.final if self.final > 0 else _ZERO_FLOOR * max(self.initial, 1.0)
        t = step / self.total_steps
        return float(self.initial * (lo / self.initial) ** t)


def constant_schedule(value: float) -> DecaySchedule:
    return DecaySchedule(value, value, 1)


class AdamState:
    """First/second moment accumulators, one pair per parameter block."""

    def __init__(self, params: dict[str, Tensor], lr: DecaySchedule,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}


def adam_step(state: AdamState, params: dict[str, Tensor],
              grads: dict[str, np.ndarray], step: int) -> None:
    """One Adam update in place; lr taken from the schedule at `step`.

    Raises GradientNanError naming the parameter block if any gradient is NaN.
    """
    lr = state.lr.value(step)
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.data.shape:
            raise DimensionError(f"gradient shape {g.shape} != param shape {p.data.shape} for {name!r}")
        if np.isnan(g).any():
            raise GradientNanError(f"NaN gradient in parameter block {name!r} at step {step}")
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p.data -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
