import logging
from dataclasses import dataclass, field

import numpy as np

from rmppi.dynamics.dataset import TransitionDataset
from rmppi.dynamics.model import LearnedDynamics
from rmppi.envs.base import Env, wrap_angle
from rmppi.errors import ConfigError, InsufficientDataError
from rmppi.nn.adam import AdamState, adam_step
from rmppi.tracker import track

logger = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    window: int = 8
    gamma: float = 0.9
    learning_rate: float = 1e-3
    batch_size: int = 64
    steps: int = 2000
    seed: int = 0
    hidden: tuple[int, ...] = (64, 64)
    activation: str = "mish"
    # fine-tuning sees only the freshly collected data instead of old + new
    new_data_only: bool = False

    def __post_init__(self):
        if self.window < 1:
            raise ConfigError(f"window must be at least 1, got {self.window}")
        if not 0 < self.gamma <= 1:
            raise ConfigError(f"gamma must lie in (0, 1], got {self.gamma}")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")
        if self.batch_size < 1 or self.steps < 0:
            raise ConfigError("batch_size must be positive and steps nonnegative")


@dataclass
class TrainingReport:
    losses: list[float] = field(default_factory=list)
    windows: int = 0
    adam_step: int = 0

    def head_tail(self, fraction: float = 0.1) -> tuple[float, float]:
        """Mean loss over the first and the last ``fraction`` of steps."""
        n = max(1, int(len(self.losses) * fraction))
        return float(np.mean(self.losses[:n])), float(np.mean(self.losses[-n:]))


@dataclass
class OpenLoopError:
    max: np.ndarray
    median: np.ndarray
    windows: int


def collect_rollouts(
    env: Env,
    policy,
    n_steps: int,
    exploration_sigma,
    rng: np.random.Generator,
    episode_length: int | None = None,
    jitter: float = 0.0,
    config_hash: str | None = None,
) -> TransitionDataset:
    """Roll out the policy mode plus Gaussian exploration noise.

    Episodes restart from ``env.reset`` every ``episode_length`` steps
    (``horizon_limit`` by default). The dataset stores the executed, clamped
    action.
    """
    if n_steps < 1:
        raise ConfigError(f"n_steps must be positive, got {n_steps}")
    spec = env.spec
    sigma = np.broadcast_to(np.asarray(exploration_sigma, dtype=np.float64), (spec.action_dim,))
    if np.any(sigma < 0):
        raise ConfigError("exploration_sigma must be nonnegative")
    episode_length = episode_length or spec.horizon_limit
    kwargs = {} if config_hash is None else {"config_hash": config_hash}
    dataset = TransitionDataset(spec.state_dim, spec.action_dim, spec.angle_dims, **kwargs)

    remaining = n_steps
    while remaining > 0:
        n = min(episode_length, remaining)
        states = np.empty((n + 1, spec.state_dim))
        actions = np.empty((n, spec.action_dim))
        states[0] = env.reset(rng, jitter)
        for t in range(n):
            noise = sigma * rng.standard_normal(spec.action_dim)
            actions[t] = env.clamp(policy.mode(states[t]) + noise)
            states[t + 1] = env.step(states[t], actions[t])
        dataset.add_episode(states, actions)
        remaining -= n
    logger.info(
        "Collected %d transitions in %d episodes on %s",
        dataset.n_transitions,
        dataset.n_episodes,
        spec.name,
    )
    return dataset


def _run_steps(
    dyn: LearnedDynamics,
    dataset: TransitionDataset,
    config: TrainConfig,
    rng: np.random.Generator,
    description: str,
) -> TrainingReport:
    index = dataset.window_index(config.window)
    if len(index) < config.batch_size:
        raise InsufficientDataError(len(index), config.batch_size)
    report = TrainingReport(windows=len(index))
    if dyn.optimizer is None:
        dyn.optimizer = AdamState.for_params(dyn.net.params(), config.learning_rate)
    for _ in track(range(config.steps), description=description):
        states, actions = dataset.sample_windows(config.window, config.batch_size, rng, index)
        loss, grads = dyn.multi_step_loss_and_grad(states, actions, config.gamma)
        dyn.net.set_params(adam_step(dyn.optimizer, dyn.net.params(), grads))
        report.losses.append(loss)
    report.adam_step = dyn.optimizer.step
    if report.losses:
        first, last = report.head_tail()
        logger.info("%s: loss %.4g -> %.4g over %d steps", description, first, last, config.steps)
    return report


def train_dynamics(
    dataset: TransitionDataset, config: TrainConfig
) -> tuple[LearnedDynamics, TrainingReport]:
    """Fit a fresh model with Adam on the mean multi-step loss."""
    rng = np.random.default_rng(config.seed)
    dyn = LearnedDynamics.create(
        dataset.state_dim,
        dataset.action_dim,
        dataset.angle_dims,
        config.hidden,
        config.activation,
        rng,
    )
    available = len(dataset.window_index(config.window))
    if available < config.batch_size:
        raise InsufficientDataError(available, config.batch_size)
    dyn.fit_normalization(*dataset.state_deltas())
    report = _run_steps(dyn, dataset, config, rng, "Training dynamics")
    return dyn, report


def finetune_online(
    dyn: LearnedDynamics,
    new_data: TransitionDataset,
    config: TrainConfig,
    old_data: TransitionDataset | None = None,
) -> tuple[LearnedDynamics, TrainingReport]:
    """Continue Adam on old + new data, or on new data only.

    Normalization stays frozen and the optimizer state carries over, so the
    Adam step counter keeps increasing.
    """
    data = new_data if config.new_data_only or old_data is None else old_data.union(new_data)
    step = dyn.optimizer.step if dyn.optimizer is not None else 0
    rng = np.random.default_rng([config.seed, step])
    report = _run_steps(dyn, data, config, rng, "Fine-tuning dynamics")
    return dyn, report


def evaluate_open_loop(dyn: LearnedDynamics, dataset: TransitionDataset, horizon: int) -> OpenLoopError:
    """Per-dimension absolute error of recursive predictions on non-overlapping windows."""
    index = dataset.window_index(horizon, stride=horizon)
    if len(index) == 0:
        raise InsufficientDataError(0, 1)
    states, actions = dataset.gather(index, horizon)
    s_hat = states[:, 0]
    errors = []
    for t in range(horizon):
        s_hat = dyn.predict_batch(s_hat, actions[:, t])
        err = states[:, t + 1] - s_hat
        for d in dataset.angle_dims:
            err[:, d] = wrap_angle(err[:, d])
        errors.append(np.abs(err))
    errors = np.concatenate(errors)
    return OpenLoopError(errors.max(axis=0), np.median(errors, axis=0), len(index))
