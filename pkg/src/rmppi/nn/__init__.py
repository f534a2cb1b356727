from rmppi.nn.adam import AdamState, adam_step
from rmppi.nn.io import (
    load_mlp,
    mlp_deserialize,
    mlp_serialize,
    save_mlp,
)
from rmppi.nn.mlp import ACTIVATIONS, Mlp, mlp_backward, mlp_forward

__all__ = [
    "ACTIVATIONS",
    "AdamState",
    "Mlp",
    "adam_step",
    "load_mlp",
    "mlp_backward",
    "mlp_deserialize",
    "mlp_forward",
    "mlp_serialize",
    "save_mlp",
]
