import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from rmppi.envs.base import Env
from rmppi.errors import ArtifactIOError, ContractError
from rmppi.planner.mppi import Planner

logger = logging.getLogger(__name__)


@dataclass
class Trajectory:
    states: np.ndarray
    actions: np.ndarray
    basic: np.ndarray
    addon: np.ndarray
    state_labels: tuple[str, ...] = ()
    state_units: tuple[str, ...] = ()
    action_labels: tuple[str, ...] = ()
    action_units: tuple[str, ...] = ()
    diagnostics: list[dict] = field(default_factory=list)

    @property
    def n_steps(self) -> int:
        return len(self.actions)


@dataclass
class EpisodeMetrics:
    total_reward: float = 0.0
    basic_reward: float = 0.0
    addon_reward: float = 0.0
    degraded_planner_steps: int = 0
    counters: dict[str, int] = field(default_factory=dict)

    def as_row(self) -> dict:
        row = {
            "total_reward": self.total_reward,
            "basic_reward": self.basic_reward,
            "addon_reward": self.addon_reward,
            "degraded_planner_steps": self.degraded_planner_steps,
        }
        row.update(self.counters)
        return row


def receding_horizon_run(
    planner: Planner,
    env: Env,
    x0,
    n_steps: int,
    diagnostics_path: Path | str | None = None,
) -> tuple[Trajectory, EpisodeMetrics]:
    """Re-plan from the true state at every step and execute the first action.

    The nominal is rebuilt from the prior on every call; nothing is carried
    over between steps. Rewards are accumulated on the true environment,
    the total as ``omega * basic + addon`` step by step with the same
    ``omega`` the planner scores with.
    """
    if n_steps < 0:
        raise ContractError(f"n_steps must be nonnegative, got {n_steps}")
    spec = env.spec
    omega = spec.omega if planner.config.omega is None else planner.config.omega
    x = np.asarray(x0, dtype=np.float64)
    states = [x]
    actions, basics, addons = [], [], []
    metrics = EpisodeMetrics()
    degraded_before = planner.degraded_steps
    counters: dict[str, int] = {}
    records = []

    for t in range(n_steps):
        u = env.clamp(planner.plan(x)[0])
        try:
            basic, addon, x_next = env.rewards_batch(*env.validate(x, u))
        except ContractError as e:
            raise ContractError(f"Environment failed at step {t}: {e}") from e
        basic, addon = float(basic), float(addon)
        metrics.basic_reward += basic
        metrics.addon_reward += addon
        metrics.total_reward += omega * basic + addon
        for name, count in env.counters(x_next).items():
            counters[name] = counters.get(name, 0) + count
        if planner.last is not None:
            records.append(asdict(planner.last))
        actions.append(u)
        basics.append(basic)
        addons.append(addon)
        x = x_next
        states.append(x)

    # every counter name is present even when nothing happened
    counters = {**{k: 0 for k in env.counters(np.asarray(x0, dtype=np.float64))}, **counters}
    counters.update(env.episode_summary(np.stack(states)))
    metrics.counters = counters
    metrics.degraded_planner_steps = planner.degraded_steps - degraded_before
    if diagnostics_path is not None and records:
        _append_jsonl(Path(diagnostics_path), records)

    trajectory = Trajectory(
        np.stack(states),
        np.asarray(actions, dtype=np.float64).reshape(n_steps, spec.action_dim),
        np.asarray(basics),
        np.asarray(addons),
        spec.state_labels,
        spec.state_units,
        spec.action_labels,
        spec.action_units,
        records,
    )
    return trajectory, metrics


def _append_jsonl(path: Path, records: list[dict]):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("a") as f:
            for record in records:
                f.write(json.dumps(_finite_or_null(record), allow_nan=False) + "\n")
    except OSError as e:
        raise ArtifactIOError(path, f"cannot append diagnostics ({e.strerror})") from e


def _finite_or_null(record: dict) -> dict:
    # beta of a degraded step is NaN, which strict JSON cannot hold
    return {k: None if isinstance(v, float) and not math.isfinite(v) else v for k, v in record.items()}
