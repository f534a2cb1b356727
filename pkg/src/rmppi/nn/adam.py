import logging
from dataclasses import dataclass, field

import numpy as np

from rmppi.errors import ContractError, NonFiniteError

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class AdamState:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params, learning_rate: float = 1e-3, **kwargs) -> "AdamState":
        return cls(
            learning_rate=learning_rate,
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
            **kwargs,
        )


def adam_step(state: AdamState, params, grads) -> list[np.ndarray]:
    """One bias-corrected Adam update; returns new parameter arrays.

    ``params`` and ``grads`` are interleaved ``[W0, b0, W1, b1, ...]`` so a
    rejected gradient reports layer ``index // 2``. Nothing is updated when
    any gradient is non-finite.
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ContractError(
            f"Adam state tracks {len(state.m)} parameters, "
            f"got {len(params)} parameters and {len(grads)} gradients"
        )
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape:
            raise ContractError(f"Gradient {i} has shape {g.shape}, expected {p.shape}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(
                f"Non-finite gradient in layer {i // 2}, step rejected", index=i // 2
            )

    state.step += 1
    b1, b2 = state.beta1, state.beta2
    correction1 = 1.0 - b1**state.step
    correction2 = 1.0 - b2**state.step
    updated = []
    for i, (p, g) in enumerate(zip(params, grads)):
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g
        m_hat = state.m[i] / correction1
        v_hat = state.v[i] / correction2
        updated.append(p - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon))
    return updated
