import itertools
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from rmppi.envs.track import CarTrack
from rmppi.errors import ConfigError, ContractError
from rmppi.mdp import StateGrid
from rmppi.nn.io import load_mlp
from rmppi.nn.mlp import Mlp
from rmppi.priors.tabular import GridClampCounter, TabularSoftPolicy

logger = logging.getLogger(__name__)

LOG_2PI = float(np.log(2.0 * np.pi))


class MeanFunction(ABC):
    """State to mean-action map backing a Gaussian prior."""

    backing: str
    action_dim: int

    @abstractmethod
    def __call__(self, x): ...


class LinearFeedback(MeanFunction):
    """``mean(x) = gain @ x + offset``."""

    backing = "linear_feedback"

    def __init__(self, gain, offset=None):
        self.gain = np.atleast_2d(np.asarray(gain, dtype=np.float64))
        self.action_dim = self.gain.shape[0]
        self.offset = (
            np.zeros(self.action_dim)
            if offset is None
            else np.asarray(offset, dtype=np.float64).reshape(self.action_dim)
        )

    def __call__(self, x):
        return np.asarray(x, dtype=np.float64) @ self.gain.T + self.offset


class MlpMean(MeanFunction):
    backing = "mlp_loaded"

    def __init__(self, net: Mlp):
        self.net = net
        self.action_dim = net.output_dim

    @classmethod
    def from_file(cls, path: Path | str) -> "MlpMean":
        return cls(load_mlp(path))

    def __call__(self, x):
        return self.net.forward(x)


class TabularInterpolatedMean(MeanFunction):
    """Multilinear interpolation of per-cell mean actions over a state grid."""

    backing = "tabular_interpolated"

    def __init__(self, grid: StateGrid, cell_means):
        self.grid = grid
        self.cell_means = np.asarray(cell_means, dtype=np.float64)
        if self.cell_means.ndim != 2 or self.cell_means.shape[0] != grid.n_cells:
            raise ConfigError(
                f"Cell means shape {self.cell_means.shape} does not match "
                f"{grid.n_cells} grid cells"
            )
        self.action_dim = self.cell_means.shape[1]
        self.table = self.cell_means.reshape(*grid.bins, self.action_dim)
        self.clamps = GridClampCounter("interpolated prior")

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1:] != (self.grid.dim,):
            raise ContractError(f"State dimension {x.shape} does not match grid {self.grid.dim}")
        self.clamps.observe(self.grid, x)
        batch_shape = x.shape[:-1]
        x = x.reshape(-1, self.grid.dim)
        lower, frac = [], []
        for d, (lo, hi, n) in enumerate(zip(self.grid.low, self.grid.high, self.grid.bins)):
            if n == 1:
                lower.append(np.zeros(len(x), dtype=np.int64))
                frac.append(np.zeros(len(x)))
                continue
            step = (hi - lo) / (n - 1)
            pos = (np.clip(x[..., d], lo, hi) - lo) / step
            i0 = np.clip(np.floor(pos).astype(np.int64), 0, n - 2)
            lower.append(i0)
            frac.append(np.clip(pos - i0, 0.0, 1.0))
        out = np.zeros((len(x), self.action_dim))
        for corner in itertools.product((0, 1), repeat=self.grid.dim):
            weight = np.ones(len(x))
            index = []
            for d, c in enumerate(corner):
                weight = weight * (frac[d] if c else 1.0 - frac[d])
                index.append(np.minimum(lower[d] + c, self.grid.bins[d] - 1))
            out = out + weight[:, None] * self.table[tuple(index)]
        return out.reshape(batch_shape + (self.action_dim,))


class TrackFollower(MeanFunction):
    """Pure-pursuit steering and proportional speed control for the car.

    The target point sits ``lookahead`` meters ahead along the centerline,
    shifted sideways by ``apex_gain * curvature`` toward the inside of the
    turn, so a positive ``apex_gain`` cuts corners.
    """

    backing = "track_follower"
    action_dim = 2

    def __init__(
        self,
        track: CarTrack,
        wheelbase: float = 2.5,
        lookahead: float = 6.0,
        target_speed: float = 8.0,
        speed_gain: float = 1.0,
        apex_gain: float = 0.0,
    ):
        if not lookahead > 0:
            raise ConfigError("lookahead must be positive")
        self.track = track
        self.wheelbase = wheelbase
        self.lookahead = lookahead
        self.target_speed = target_speed
        self.speed_gain = speed_gain
        self.apex_gain = apex_gain

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        pos, heading, speed = x[..., :2], x[..., 2], x[..., 3]
        _, _, s = self.track.project(pos)
        point, tangent, kappa = self.track.point_at(s + self.lookahead)
        normal = np.stack([-tangent[..., 1], tangent[..., 0]], axis=-1)
        target = point + np.expand_dims(self.apex_gain * kappa, -1) * normal
        rel = target - pos
        # bearing of the target in the vehicle frame
        alpha = np.arctan2(rel[..., 1], rel[..., 0]) - heading
        alpha = (alpha + np.pi) % (2.0 * np.pi) - np.pi
        dist = np.maximum(np.linalg.norm(rel, axis=-1), 1e-6)
        steer = np.arctan2(2.0 * self.wheelbase * np.sin(alpha), dist)
        accel = self.speed_gain * (self.target_speed - speed)
        return np.stack([steer, accel], axis=-1)


@dataclass(eq=False)
class GaussianPolicy:
    """Diagonal Gaussian ``N(mean_fn(x), diag(variance))``; the mode is the mean."""

    mean_fn: MeanFunction
    variance: np.ndarray

    def __post_init__(self):
        var = np.asarray(self.variance, dtype=np.float64).reshape(-1)
        if var.size == 1 and self.mean_fn.action_dim > 1:
            var = np.full(self.mean_fn.action_dim, var[0])
        if var.shape != (self.mean_fn.action_dim,):
            raise ConfigError(
                f"Variance has {var.size} entries, mean function has "
                f"{self.mean_fn.action_dim} action dimensions"
            )
        if not np.all(var > 0):
            raise ConfigError("Gaussian prior variance must be positive in every dimension")
        self.variance = var

    @property
    def backing(self) -> str:
        return self.mean_fn.backing

    @property
    def action_dim(self) -> int:
        return self.mean_fn.action_dim

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(self.variance)

    def mode(self, x):
        return self.mean_fn(x)

    def log_prob(self, x, u):
        mu = self.mean_fn(x)
        u = np.asarray(u, dtype=np.float64)
        if u.shape[-1:] != (self.action_dim,):
            raise ContractError(f"Action has shape {u.shape}, expected dimension {self.action_dim}")
        return -0.5 * np.sum((u - mu) ** 2 / self.variance + np.log(self.variance) + LOG_2PI, axis=-1)

    def sample(self, x, rng: np.random.Generator):
        mu = self.mean_fn(x)
        return mu + rng.standard_normal(mu.shape) * self.std


def tabular_to_continuous(tab: TabularSoftPolicy, smoothing_sigma: float) -> GaussianPolicy:
    """Gaussian prior whose mean interpolates the per-cell Boltzmann-mean action."""
    if not smoothing_sigma > 0:
        raise ConfigError(f"smoothing_sigma must be positive, got {smoothing_sigma}")
    mean_fn = TabularInterpolatedMean(tab.grid, tab.boltzmann_mean())
    return GaussianPolicy(mean_fn, np.full(tab.action_dim, smoothing_sigma**2))
