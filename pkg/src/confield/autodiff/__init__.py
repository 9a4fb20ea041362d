"""Array math, reverse-mode autodiff, MLPs, and the optimizer."""

from .nn import (
    MlpSpec,
    encoded_dim,
    grouped_mlp_forward,
    init_mlp,
    mlp,
    mlp_forward,
    positional_encode,
)
from .optim import AdamState, DecaySchedule, adam_step, constant_schedule
from .tensor import (
    Tensor,
    as_tensor,
    backward,
    concat,
    default_dtype,
    gather_rows,
    grad_enabled,
    no_grad,
    precision,
    stack,
    where_mask,
)

__all__ = [
    "AdamState",
    "DecaySchedule",
    "MlpSpec",
    "Tensor",
    "adam_step",
    "as_tensor",
    "backward",
    "concat",
    "constant_schedule",
    "default_dtype",
    "encoded_dim",
    "gather_rows",
    "grad_enabled",
    "grouped_mlp_forward",
    "init_mlp",
    "mlp",
    "mlp_forward",
    "no_grad",
    "positional_encode",
    "precision",
    "stack",
    "where_mask",
]
