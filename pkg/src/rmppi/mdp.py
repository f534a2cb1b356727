"""Finite deterministic MDPs, their soft-optimal solutions and the grids that
connect them to the continuous environments."""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import softmax

from rmppi.errors import ConfigError, ContractError

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class DiscreteMDP:
    """Deterministic finite MDP.

    ``reward`` is either a stationary ``(S, A)`` table or a stage-indexed
    ``(H, S, A)`` table whose stage ``t`` applies to the decision ``t`` steps
    after the start. ``addon`` optionally carries an add-on reward table
    evaluated on the same cells.
    """

    transition: np.ndarray
    reward: np.ndarray
    action_cell_volume: float = 1.0
    addon: np.ndarray | None = None

    def __post_init__(self):
        self.transition = np.asarray(self.transition, dtype=np.int64)
        self.reward = np.asarray(self.reward, dtype=np.float64)
        if self.transition.ndim != 2:
            raise ConfigError("Transition table must be (n_states, n_actions)")
        n_states, n_actions = self.transition.shape
        if n_states < 1 or n_actions < 1:
            raise ConfigError("MDP needs at least one state and one action")
        if self.transition.min() < 0 or self.transition.max() >= n_states:
            raise ConfigError("Transition indices out of range")
        if self.reward.shape[-2:] != (n_states, n_actions) or self.reward.ndim not in (2, 3):
            raise ConfigError(
                f"Reward shape {self.reward.shape} does not match "
                f"({n_states}, {n_actions})"
            )
        if not np.all(np.isfinite(self.reward)):
            raise ConfigError("Rewards must be finite")
        if not self.action_cell_volume > 0:
            raise ConfigError("action_cell_volume must be positive")
        if self.addon is not None:
            self.addon = np.asarray(self.addon, dtype=np.float64)
            if self.addon.shape != (n_states, n_actions):
                raise ConfigError("Add-on table must match (n_states, n_actions)")

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]

    @property
    def staged(self) -> bool:
        return self.reward.ndim == 3

    def reward_at(self, t: int) -> np.ndarray:
        if not self.staged:
            return self.reward
        if not 0 <= t < self.reward.shape[0]:
            raise ContractError(
                f"Stage {t} outside staged reward of length {self.reward.shape[0]}"
            )
        return self.reward[t]

    def with_reward(self, reward) -> "DiscreteMDP":
        return DiscreteMDP(self.transition, reward, self.action_cell_volume, self.addon)

    def trace(self, x0: int, actions) -> list[int]:
        states = [int(x0)]
        for a in actions:
            states.append(int(self.transition[states[-1], a]))
        return states


@dataclass(eq=False)
class TabularSolution:
    """Soft-optimal quantities per stage.

    ``q_stages[t]`` is the soft Q table for the decision ``t`` steps after the
    start, ``v_stages[t] = alpha * log_z_stages[t]`` and ``v_stages[-1]`` is
    the terminal value. An infinite-horizon solution has a single stage that
    is reused at every step.
    """

    q_stages: np.ndarray
    v_stages: np.ndarray
    log_z_stages: np.ndarray
    alpha: float
    gamma: float
    action_cell_volume: float
    horizon: int | None

    @property
    def q(self) -> np.ndarray:
        return self.q_stages[0]

    @property
    def v(self) -> np.ndarray:
        return self.v_stages[0]

    @property
    def z(self) -> np.ndarray:
        return np.exp(self.log_z_stages[0])

    @property
    def n_stages(self) -> int:
        return self.q_stages.shape[0]

    def stage(self, t: int) -> int:
        if self.horizon is None:
            return 0
        if not 0 <= t < self.n_stages:
            raise ContractError(f"Stage {t} beyond horizon {self.horizon}")
        return t

    def value_after(self, t: int) -> np.ndarray:
        """Soft value of the state reached after ``t`` decisions."""
        if self.horizon is None:
            return self.v_stages[0]
        return self.v_stages[t]

    def boltzmann(self, t: int = 0) -> np.ndarray:
        """Probability mass per action cell, rows sum to one."""
        return softmax(self.q_stages[self.stage(t)] / self.alpha, axis=-1)

    def log_density(self, t: int = 0) -> np.ndarray:
        """``log pi(u|x)`` as a density: ``Q / alpha - log Z``."""
        s = self.stage(t)
        return self.q_stages[s] / self.alpha - self.log_z_stages[s][:, None]


@dataclass(frozen=True, eq=False)
class StateGrid:
    """Axis-aligned grid of cell centers ``linspace(low, high, bins)`` per dimension."""

    low: np.ndarray
    high: np.ndarray
    bins: tuple[int, ...]
    _axes: tuple[np.ndarray, ...] = field(init=False, repr=False)

    def __post_init__(self):
        low = np.asarray(self.low, dtype=np.float64).reshape(-1)
        high = np.asarray(self.high, dtype=np.float64).reshape(-1)
        bins = tuple(int(b) for b in self.bins)
        if not (low.shape == high.shape and len(bins) == low.size):
            raise ConfigError("Grid low, high and bins must have one entry per dimension")
        for d, (lo, hi, n) in enumerate(zip(low, high, bins)):
            if n < 1:
                raise ConfigError(f"Grid dimension {d} needs at least one bin")
            if n == 1 and lo != hi:
                raise ConfigError(f"Single-bin grid dimension {d} needs low == high")
            if n > 1 and not lo < hi:
                raise ConfigError(f"Grid dimension {d} needs low < high")
        object.__setattr__(self, "low", low)
        object.__setattr__(self, "high", high)
        object.__setattr__(self, "bins", bins)
        axes = tuple(np.linspace(lo, hi, n) for lo, hi, n in zip(low, high, bins))
        object.__setattr__(self, "_axes", axes)

    @property
    def dim(self) -> int:
        return len(self.bins)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.bins))

    @property
    def axes(self) -> tuple[np.ndarray, ...]:
        return self._axes

    @property
    def spacing(self) -> np.ndarray:
        return np.array(
            [(hi - lo) / (n - 1) if n > 1 else 0.0 for lo, hi, n in zip(self.low, self.high, self.bins)]
        )

    def centers(self) -> np.ndarray:
        mesh = np.meshgrid(*self._axes, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=-1)

    def center(self, index: int) -> np.ndarray:
        multi = np.unravel_index(index, self.bins)
        return np.array([axis[i] for axis, i in zip(self._axes, multi)])

    def outside(self, x, tol: float = 1e-9) -> np.ndarray:
        """True where ``x`` lies outside the box covered by the cells."""
        x = np.asarray(x, dtype=np.float64)
        half = 0.5 * self.spacing
        return np.any((x < self.low - half - tol) | (x > self.high + half + tol), axis=-1)

    def multi_index(self, x) -> np.ndarray:
        """Nearest cell per dimension, clamped to the grid."""
        x = np.asarray(x, dtype=np.float64)
        idx = []
        for d, (lo, n) in enumerate(zip(self.low, self.bins)):
            if n == 1:
                idx.append(np.zeros(x.shape[:-1], dtype=np.int64))
                continue
            step = (self.high[d] - lo) / (n - 1)
            # floor(y + 0.5) resolves exact midpoints to the upper cell
            i = np.floor((x[..., d] - lo) / step + 0.5).astype(np.int64)
            idx.append(np.clip(i, 0, n - 1))
        return np.stack(idx, axis=-1)

    def index(self, x) -> np.ndarray:
        multi = self.multi_index(x)
        return np.ravel_multi_index(tuple(np.moveaxis(multi, -1, 0)), self.bins)


@dataclass(frozen=True, eq=False)
class ActionGrid:
    """Cartesian product of per-dimension action values (last dimension fastest)."""

    values: tuple[np.ndarray, ...]

    def __post_init__(self):
        values = tuple(np.asarray(v, dtype=np.float64).reshape(-1) for v in self.values)
        if not values or any(v.size < 1 for v in values):
            raise ConfigError("Action grid needs at least one value per dimension")
        for v in values:
            if v.size > 1 and not np.all(np.diff(v) > 0):
                raise ConfigError("Action grid values must be strictly increasing")
        object.__setattr__(self, "values", values)

    @property
    def dim(self) -> int:
        return len(self.values)

    @property
    def n_actions(self) -> int:
        return int(np.prod([v.size for v in self.values]))

    def actions(self) -> np.ndarray:
        mesh = np.meshgrid(*self.values, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=-1)

    @property
    def cell_volume(self) -> float:
        """Product of per-dimension spacings; single-value dimensions count as 1."""
        vol = 1.0
        for v in self.values:
            if v.size > 1:
                vol *= float(np.mean(np.diff(v)))
        return vol

    def nearest(self, u) -> np.ndarray:
        """Index of the nearest action cell (lowest index on ties)."""
        u = np.asarray(u, dtype=np.float64)
        d2 = np.sum((u[..., None, :] - self.actions()) ** 2, axis=-1)
        return np.argmin(d2, axis=-1)
