import logging
import math
from dataclasses import dataclass, fields, replace
from enum import Enum

import numpy as np

from rmppi.errors import ConfigError

logger = logging.getLogger(__name__)


class Variant(str, Enum):
    RESIDUAL = "residual"
    GREEDY = "greedy"
    FULL = "full"
    GUIDED = "guided"
    VALUED = "valued"
    # bypasses planning and executes the prior's mode
    PRIOR = "prior"

    @classmethod
    def parse(cls, value) -> "Variant":
        try:
            return cls(value)
        except ValueError:
            raise ConfigError(
                f"Unknown planner variant '{value}', expected one of "
                f"{', '.join(v.value for v in cls)}"
            ) from None


@dataclass(frozen=True, eq=False)
class PlannerConfig:
    variant: Variant = Variant.RESIDUAL
    samples: int = 256
    horizon: int = 10
    sigma: tuple[float, ...] = (0.3,)
    temperature: float = 1.0
    gamma: float = 0.9
    omega_prime: float = 1.0
    # None defers to the environment's omega
    omega: float | None = None
    top_ratio: float = 1.0
    include_nominal: bool = True
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant.parse(self.variant))
        sigma = tuple(float(s) for s in np.atleast_1d(self.sigma))
        object.__setattr__(self, "sigma", sigma)
        if self.samples < 1:
            raise ConfigError(f"samples must be at least 1, got {self.samples}")
        if self.horizon < 1:
            raise ConfigError(f"horizon must be at least 1, got {self.horizon}")
        if not sigma or not all(s > 0 and math.isfinite(s) for s in sigma):
            raise ConfigError(f"sigma must be positive, got {sigma}")
        if not self.temperature > 0:
            raise ConfigError(f"temperature must be positive, got {self.temperature}")
        if not 0 < self.gamma <= 1:
            raise ConfigError(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.omega_prime < 0:
            raise ConfigError(f"omega_prime must be nonnegative, got {self.omega_prime}")
        if self.omega is not None and self.omega < 0:
            raise ConfigError(f"omega must be nonnegative, got {self.omega}")
        if not 0 < self.top_ratio <= 1:
            raise ConfigError(f"top_ratio must lie in (0, 1], got {self.top_ratio}")

    def sigma_for(self, action_dim: int) -> np.ndarray:
        """Per-dimension noise std, a single value broadcast over the action."""
        if len(self.sigma) == 1:
            return np.full(action_dim, self.sigma[0])
        if len(self.sigma) != action_dim:
            raise ConfigError(
                f"sigma has {len(self.sigma)} entries, the action has {action_dim} dimensions"
            )
        return np.asarray(self.sigma)

    def with_overrides(self, **overrides) -> "PlannerConfig":
        unknown = set(overrides) - {f.name for f in fields(self)}
        if unknown:
            raise ConfigError(f"Unknown planner keys: {', '.join(sorted(unknown))}")
        return replace(self, **overrides)


# Reference values from large-scale locomotion and racing setups; no environment
# for them ships here.
PLANNER_PRESETS: dict[str, dict] = {
    "halfcheetah": dict(
        horizon=2, samples=10000, sigma=(0.017,), omega_prime=1e-7, gamma=0.9, temperature=5e-5
    ),
    "ant": dict(horizon=5, samples=5000, sigma=(0.005,), omega_prime=1e-2, gamma=0.9, temperature=5e-3),
    "swimmer": dict(
        horizon=5, samples=5000, sigma=(0.02,), omega_prime=1e-4, gamma=0.9, temperature=1e-4
    ),
    "hopper": dict(
        horizon=8, samples=10000, sigma=(0.005,), omega_prime=2e-7, gamma=0.9, temperature=1e-5
    ),
    "gts": dict(
        horizon=15,
        samples=500,
        sigma=(0.035,),
        top_ratio=0.048,
        omega_prime=3.0,
        gamma=0.8,
        temperature=0.5,
    ),
    "point_mass": dict(
        horizon=10, samples=256, sigma=(0.3,), omega_prime=0.05, gamma=0.9, temperature=0.1
    ),
    "point_mass_1d": dict(
        horizon=3, samples=256, sigma=(2.0,), omega_prime=0.05, gamma=0.9, temperature=0.1
    ),
    "pendulum": dict(
        horizon=15, samples=256, sigma=(0.5,), omega_prime=0.05, gamma=0.95, temperature=0.5
    ),
    "car": dict(
        horizon=12,
        samples=256,
        sigma=(0.05, 0.5),
        omega_prime=0.05,
        gamma=0.95,
        temperature=1.0,
        top_ratio=0.25,
    ),
}

DYNAMICS_PRESETS: dict[str, dict] = {
    "mujoco": dict(
        hidden=(256, 256, 256, 256),
        activation="mish",
        learning_rate=1e-5,
        batch_size=256,
        window=8,
        gamma=0.9,
        dataset_steps=200000,
    ),
    "gts": dict(
        hidden=(2048, 2048, 2048),
        activation="mish",
        learning_rate=1e-5,
        batch_size=256,
        window=5,
        gamma=1.0,
        dataset_steps=200000,
    ),
    "desk": dict(
        hidden=(64, 64),
        activation="mish",
        learning_rate=1e-3,
        batch_size=64,
        window=8,
        gamma=0.9,
        dataset_steps=20000,
    ),
}


def planner_preset(name: str, **overrides) -> PlannerConfig:
    if name not in PLANNER_PRESETS:
        raise ConfigError(
            f"Unknown planner preset '{name}', expected one of {', '.join(PLANNER_PRESETS)}"
        )
    return PlannerConfig(**{**PLANNER_PRESETS[name], **overrides})
