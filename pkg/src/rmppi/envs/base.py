import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np

from rmppi.errors import ConfigError, ContractError, NonFiniteError

logger = logging.getLogger(__name__)


def wrap_angle(theta):
    """Map angles to [-pi, pi)."""
    return (np.asarray(theta) + np.pi) % (2.0 * np.pi) - np.pi


@dataclass(frozen=True, eq=False)
class EnvSpec:
    name: str
    state_dim: int
    action_dim: int
    action_low: np.ndarray
    action_high: np.ndarray
    dt: float
    omega: float = 1.0
    horizon_limit: int = 200
    # state dimensions holding angles; the dynamics model encodes them as (sin, cos)
    angle_dims: tuple[int, ...] = ()
    state_labels: tuple[str, ...] = ()
    state_units: tuple[str, ...] = ()
    action_labels: tuple[str, ...] = ()
    action_units: tuple[str, ...] = ()
    initial_state: np.ndarray = field(default=None)

    def __post_init__(self):
        low = np.asarray(self.action_low, dtype=np.float64).reshape(-1)
        high = np.asarray(self.action_high, dtype=np.float64).reshape(-1)
        object.__setattr__(self, "action_low", low)
        object.__setattr__(self, "action_high", high)
        if self.state_dim < 1 or self.action_dim < 1:
            raise ConfigError(
                f"{self.name}: state_dim and action_dim must be positive, "
                f"got {self.state_dim} and {self.action_dim}"
            )
        if low.shape != (self.action_dim,) or high.shape != (self.action_dim,):
            raise ConfigError(
                f"{self.name}: action bounds must have {self.action_dim} entries"
            )
        if not np.all(low < high):
            raise ConfigError(f"{self.name}: action_low must be below action_high")
        if not self.dt > 0:
            raise ConfigError(f"{self.name}: dt must be positive, got {self.dt}")
        if self.omega < 0:
            raise ConfigError(f"{self.name}: omega must be nonnegative")
        if self.horizon_limit < 1:
            raise ConfigError(f"{self.name}: horizon_limit must be positive")
        x0 = self.initial_state
        x0 = np.zeros(self.state_dim) if x0 is None else np.asarray(x0, np.float64)
        if x0.shape != (self.state_dim,):
            raise ConfigError(
                f"{self.name}: initial_state must have {self.state_dim} entries"
            )
        object.__setattr__(self, "initial_state", x0)


class Env(ABC):
    """Deterministic environment with a basic and an add-on reward.

    All methods accept a single vector or a batch with the vector dimension
    last. The public ``step`` and reward methods validate their inputs; the
    ``*_batch`` variants skip validation so that planner rollouts can carry
    non-finite candidates to the scorer instead of raising.
    """

    spec: EnvSpec

    def __init__(self, spec: EnvSpec):
        self.spec = spec

    def clamp(self, u):
        return np.clip(u, self.spec.action_low, self.spec.action_high)

    def validate(self, x, u=None):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1:] != (self.spec.state_dim,):
            raise ContractError(
                f"{self.spec.name}: state has shape {x.shape}, "
                f"expected trailing dimension {self.spec.state_dim}"
            )
        if not np.all(np.isfinite(x)):
            raise NonFiniteError(f"{self.spec.name}: non-finite state {x}")
        if u is None:
            return x, None
        u = np.asarray(u, dtype=np.float64)
        if u.shape[-1:] != (self.spec.action_dim,):
            raise ContractError(
                f"{self.spec.name}: action has shape {u.shape}, "
                f"expected trailing dimension {self.spec.action_dim}"
            )
        if not np.all(np.isfinite(u)):
            raise NonFiniteError(f"{self.spec.name}: non-finite action {u}")
        return x, u

    def step(self, x, u):
        x, u = self.validate(x, u)
        return self.step_batch(x, u)

    def step_batch(self, x, u):
        return self._integrate(x, self.clamp(u))

    def basic_reward(self, x, u):
        x, u = self.validate(x, u)
        return self.rewards_batch(x, u)[0]

    def addon_reward(self, x, u):
        x, u = self.validate(x, u)
        return self.rewards_batch(x, u)[1]

    def rewards_batch(self, x, u):
        """Return ``(basic, addon, next_state)`` for clamped ``u``."""
        u = self.clamp(u)
        x_next = self._integrate(x, u)
        return self._basic(x, u, x_next), self._addon(x, u, x_next), x_next

    def rewards_for(self, x, u, x_next):
        """Rewards of a transition produced by some other model of the dynamics."""
        u = self.clamp(u)
        return self._basic(x, u, x_next), self._addon(x, u, x_next)

    def reset(self, rng: np.random.Generator | None = None, jitter: float = 0.0):
        x0 = self.spec.initial_state.copy()
        if jitter > 0:
            if rng is None:
                raise ContractError("reset with jitter requires an rng")
            x0 = x0 + rng.uniform(-jitter, jitter, size=x0.shape)
        return x0

    def counters(self, x) -> dict[str, int]:
        """Per-step event counters evaluated at an executed state."""
        return {}

    def episode_summary(self, states) -> dict[str, int]:
        """Whole-episode statistics over the executed state trace."""
        return {}

    def identity(self) -> tuple:
        """Hashable description of everything that shapes dynamics and rewards."""
        s = self.spec
        return (
            type(self).__name__,
            s.dt,
            s.omega,
            tuple(s.action_low),
            tuple(s.action_high),
        ) + self._extra_identity()

    def _extra_identity(self) -> tuple:
        return ()

    @abstractmethod
    def _integrate(self, x, u): ...

    @abstractmethod
    def _basic(self, x, u, x_next): ...

    @abstractmethod
    def _addon(self, x, u, x_next): ...
