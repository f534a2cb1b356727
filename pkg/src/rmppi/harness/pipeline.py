"""Experiment commands: train the dynamics, plan, fine-tune, check the oracle.

Each command writes into the experiment's run directory and finishes with a
``manifest.json`` listing the config hash, the seed and the created files.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

import rmppi
from rmppi.dynamics import (
    LearnedDynamics,
    TrainConfig,
    TransitionDataset,
    collect_rollouts,
    evaluate_open_loop,
    finetune_online,
    load_dataset,
    load_dynamics,
    save_dataset,
    save_dynamics,
    train_dynamics,
)
from rmppi.envs import Env, make_env
from rmppi.errors import AcceptanceViolation, ArtifactIOError, ConfigError
from rmppi.harness.config import ExperimentConfig
from rmppi.harness.io import (
    metrics_frame,
    plot_training_curve,
    plot_trajectory,
    summarize,
    write_manifest,
    write_table,
    write_trajectory,
)
from rmppi.mdp import ActionGrid, StateGrid
from rmppi.oracle import GridSpec, discretize_env, load_fixture_suite, run_fixture_suite, write_report
from rmppi.planner import EpisodeMetrics, Planner, PlannerConfig, Variant, receding_horizon_run
from rmppi.priors import (
    GaussianPolicy,
    LinearFeedback,
    MlpMean,
    TabularSoftPolicy,
    TrackFollower,
    load_tabular,
    soft_q_iteration,
    tabular_to_continuous,
)
from rmppi.tracker import track

logger = logging.getLogger(__name__)

MODEL_FILE = "dynamics.rmdy"
DATASET_FILE = "dataset.rmpd"
DEFAULT_FIXTURES = Path("fixtures") / "oracle_suite.json"


@dataclass
class PriorBundle:
    policy: object
    # tabular solution backing the policy, when there is one
    table: TabularSoftPolicy | None = None


@dataclass
class RunResult:
    run_dir: Path
    metrics: pd.DataFrame
    summary: pd.DataFrame
    files: list[Path] = field(default_factory=list)


@dataclass
class TrainResult:
    run_dir: Path
    model_path: Path
    losses: list[float]
    heldout_max: np.ndarray
    heldout_median: np.ndarray
    files: list[Path] = field(default_factory=list)


# builders


def build_env(config: ExperimentConfig) -> Env:
    block = dict(config.env)
    env_id = block.pop("id")
    track_path = block.pop("track")
    block.pop("jitter")
    overrides = {k: v for k, v in block.items() if v is not None}
    if "initial_state" in overrides:
        overrides["initial_state"] = np.asarray(overrides["initial_state"])
    return make_env(env_id, track=track_path, **overrides)


def _gaussian(config: ExperimentConfig, mean_fn) -> GaussianPolicy:
    return GaussianPolicy(mean_fn, np.asarray(config.prior["variance"]))


def _soft_q_prior(config: ExperimentConfig, env: Env) -> TabularSoftPolicy:
    block = config.prior
    if block["table"] is not None:
        return load_tabular(block["table"])
    missing = [k for k in ("grid_low", "grid_high", "grid_bins", "action_values") if block[k] is None]
    if missing:
        raise ConfigError(f"[prior] type = soft_q needs {', '.join(missing)} or a table file")
    grid = GridSpec(
        StateGrid(np.asarray(block["grid_low"]), np.asarray(block["grid_high"]), block["grid_bins"]),
        ActionGrid(tuple(np.asarray(row) for row in block["action_values"])),
    )
    mdp = discretize_env(env, grid)
    sol = soft_q_iteration(
        mdp.with_reward(env.spec.omega * mdp.reward), block["alpha"], horizon=None, gamma=block["gamma"]
    )
    logger.info(
        "Solved soft Q prior on %d cells x %d actions", grid.states.n_cells, grid.actions.n_actions
    )
    return TabularSoftPolicy.from_solution(grid.states, grid.actions, sol)


def build_prior(config: ExperimentConfig, env: Env) -> PriorBundle:
    block = config.prior
    kind = block["type"]
    sd, ad = env.spec.state_dim, env.spec.action_dim
    if kind == "zero":
        return PriorBundle(_gaussian(config, LinearFeedback(np.zeros((ad, sd)))))
    if kind == "linear_feedback":
        if block["gain"] is None:
            raise ConfigError("[prior] type = linear_feedback needs a gain matrix")
        return PriorBundle(_gaussian(config, LinearFeedback(block["gain"], block["offset"])))
    if kind == "mlp":
        if block["weights"] is None:
            raise ConfigError("[prior] type = mlp needs a weights file")
        return PriorBundle(_gaussian(config, MlpMean.from_file(block["weights"])))
    if kind == "track_follower":
        if not hasattr(env, "track"):
            raise ConfigError("[prior] type = track_follower only applies to the car")
        mean_fn = TrackFollower(
            env.track,
            env.wheelbase,
            block["lookahead"],
            block["target_speed"],
            block["speed_gain"],
            block["apex_gain"],
        )
        return PriorBundle(_gaussian(config, mean_fn))
    if kind == "soft_q":
        table = _soft_q_prior(config, env)
        if block["smoothing_sigma"] > 0:
            return PriorBundle(tabular_to_continuous(table, block["smoothing_sigma"]), table)
        return PriorBundle(table, table)
    raise ConfigError(
        f"Unknown prior type '{kind}', expected zero, linear_feedback, mlp, track_follower or soft_q"
    )


def build_terminal(config: ExperimentConfig, prior: PriorBundle):
    kind = config.planner["terminal"]
    if kind == "zero":
        return lambda x: np.zeros(np.shape(x)[:-1])
    if kind == "soft_value":
        if prior.table is None:
            raise ConfigError("planner terminal = soft_value needs a soft_q prior")
        table = prior.table
        return lambda x: table.alpha * table.log_z(x)
    raise ConfigError(f"Unknown terminal estimator '{kind}', expected zero or soft_value")


def train_config(config: ExperimentConfig) -> TrainConfig:
    s = config.dynamics_settings()
    return TrainConfig(
        window=s["window"],
        gamma=s["gamma"],
        learning_rate=s["learning_rate"],
        batch_size=s["batch_size"],
        steps=s["steps"],
        seed=config.seed,
        hidden=tuple(s["hidden"]),
        activation=s["activation"],
        new_data_only=s["new_data_only"],
    )


def model_path(config: ExperimentConfig) -> Path:
    if config.dynamics["model"]:
        return Path(config.dynamics["model"])
    return config.output_dir / MODEL_FILE


def _episode_rng(seed: int, episode: int, iteration: int = 0) -> np.random.Generator:
    return np.random.default_rng([seed, iteration, episode])


def _diagnostics_enabled(config: ExperimentConfig) -> bool:
    if config.run["diagnostics"] is not None:
        return config.run["diagnostics"]
    return rmppi.config.getboolean("planner", "diagnostics", fallback=False)


def _run_episodes(
    config: ExperimentConfig,
    env: Env,
    prior: PriorBundle,
    dynamics,
    planner_config: PlannerConfig,
    run_dir: Path,
    iteration: int = 0,
    label: str = "",
):
    """Run every episode, write its trajectory and return metrics and trajectories."""
    n_steps = config.run["n_steps"] or env.spec.horizon_limit
    terminal = build_terminal(config, prior) if planner_config.variant is Variant.VALUED else None
    diagnostics = run_dir / "diagnostics.jsonl" if _diagnostics_enabled(config) else None
    episodes, trajectories, files = [], [], []
    for e in track(range(config.run["n_episodes"]), description=f"Episodes{label}"):
        rng = _episode_rng(config.seed, e, iteration)
        x0 = env.reset(rng, config.env["jitter"])
        planner = Planner(planner_config, env, prior.policy, dynamics, terminal, rng=rng)
        traj, metrics = receding_horizon_run(planner, env, x0, n_steps, diagnostics)
        path = run_dir / "trajectories" / f"episode_{e:04d}{label}.csv"
        write_trajectory(traj, path)
        files.append(path)
        if config.run["plots"]:
            plot = run_dir / "plots" / f"episode_{e:04d}{label}.png"
            plot_trajectory(traj, env, plot)
            files.append(plot)
        episodes.append(metrics)
        trajectories.append(traj)
    if diagnostics is not None and diagnostics.exists():
        files.append(diagnostics)
    return episodes, trajectories, files


def _write_metrics(run_dir: Path, episodes: list[EpisodeMetrics], prefix: str = ""):
    metrics = metrics_frame(episodes)
    summary = summarize(metrics)
    paths = [run_dir / f"{prefix}metrics.csv", run_dir / f"{prefix}summary.csv"]
    write_table(metrics, paths[0])
    write_table(summary, paths[1])
    return metrics, summary, paths


def _planning_dynamics(config: ExperimentConfig, env: Env):
    if config.dynamics["use_true_dynamics"]:
        return None
    path = model_path(config)
    if not path.exists():
        raise ArtifactIOError(path, "no dynamics model, run train-dynamics first")
    return load_dynamics(path)


# commands


def cmd_train_dynamics(config: ExperimentConfig) -> TrainResult:
    """Collect prior rollouts with exploration noise, fit the model, save it."""
    if config.dynamics["use_true_dynamics"]:
        raise ConfigError(
            "[dynamics] use_true_dynamics is set, there is no model to train; "
            "unset it or run the planner directly"
        )
    run_dir = config.output_dir
    env = build_env(config)
    prior = build_prior(config, env)
    settings = config.dynamics_settings()
    rng = np.random.default_rng(config.seed)
    dataset = collect_rollouts(
        env,
        prior.policy,
        settings["dataset_steps"],
        np.asarray(settings["exploration_sigma"]),
        rng,
        jitter=config.env["jitter"],
        config_hash=config.config_hash,
    )
    train, heldout = dataset.split(settings["heldout_fraction"])
    tc = train_config(config)
    dyn, report = train_dynamics(train, tc)
    error = evaluate_open_loop(dyn, heldout if heldout.n_episodes else train, tc.window)
    logger.info(
        "Held-out %d-step error: max %s, median %s",
        tc.window,
        np.array2string(error.max, precision=3),
        np.array2string(error.median, precision=3),
    )

    path = model_path(config)
    save_dynamics(dyn, path)
    save_dataset(dataset, run_dir / DATASET_FILE)
    curve = pd.DataFrame({"step": np.arange(1, len(report.losses) + 1), "loss": report.losses})
    files = [run_dir / DATASET_FILE, run_dir / "training.csv", run_dir / "open_loop_error.csv"]
    if path.is_relative_to(run_dir):
        files.append(path)
    write_table(curve, files[1])
    labels = env.spec.state_labels or tuple(str(i) for i in range(env.spec.state_dim))
    write_table(
        pd.DataFrame({"dimension": labels, "max": error.max, "median": error.median}), files[2]
    )
    if config.run["plots"] and report.losses:
        files.append(run_dir / "plots" / "training.png")
        plot_training_curve(report, files[-1])
    write_manifest(run_dir, "train-dynamics", config.config_hash, config.seed, files)
    return TrainResult(run_dir, path, report.losses, error.max, error.median, files)


def cmd_run(config: ExperimentConfig, variant: str | None = None) -> RunResult:
    """Receding-horizon episodes, one metrics row per episode."""
    run_dir = config.output_dir
    env = build_env(config)
    prior = build_prior(config, env)
    overrides = {"variant": variant} if variant else {}
    planner_config = config.planner_config(**overrides)
    dynamics = _planning_dynamics(config, env)
    logger.info(
        "Running %d %s episodes on %s (%s dynamics)",
        config.run["n_episodes"],
        planner_config.variant.value,
        env.spec.name,
        "true" if dynamics is None else "learned",
    )
    episodes, _, files = _run_episodes(config, env, prior, dynamics, planner_config, run_dir)
    metrics, summary, paths = _write_metrics(run_dir, episodes)
    files += paths
    write_manifest(run_dir, "run", config.config_hash, config.seed, files)
    return RunResult(run_dir, metrics, summary, files)


def _trajectories_to_dataset(trajectories, template: TransitionDataset) -> TransitionDataset:
    data = TransitionDataset(
        template.state_dim, template.action_dim, template.angle_dims, None, template.config_hash
    )
    for traj in trajectories:
        data.add_episode(traj.states, traj.actions)
    return data


def cmd_fewshot(config: ExperimentConfig, n_iterations: int) -> RunResult:
    """Alternate planner runs with fine-tuning on the visited transitions.

    Iteration ``i`` plans with the current model, adds the executed
    trajectories to the dataset and fine-tunes. A final evaluation with the
    last model follows, so zero iterations reproduce ``cmd_run``.
    """
    if n_iterations < 0:
        raise ConfigError("--iterations must be nonnegative")
    if config.dynamics["use_true_dynamics"]:
        raise ConfigError("Few-shot fine-tuning needs a learned model, unset use_true_dynamics")
    run_dir = config.output_dir
    env = build_env(config)
    prior = build_prior(config, env)
    planner_config = config.planner_config()
    dyn: LearnedDynamics = _planning_dynamics(config, env)
    dataset = load_dataset(run_dir / DATASET_FILE, expected_hash=config.config_hash)
    tc = train_config(config)

    files: list[Path] = []
    rows = []
    for i in track(range(n_iterations), description="Few-shot iterations"):
        episodes, trajectories, episode_files = _run_episodes(
            config, env, prior, dyn, planner_config, run_dir, iteration=i + 1, label=f"_iter{i + 1:02d}"
        )
        files += episode_files
        new_data = _trajectories_to_dataset(trajectories, dataset)
        dyn, _ = finetune_online(dyn, new_data, tc, old_data=dataset)
        dataset = dataset.union(new_data)
        logger.info("Iteration %d: dataset holds %d transitions", i + 1, dataset.n_transitions)
        rows.append(_iteration_row(i, episodes, dataset.n_transitions))

    episodes, _, episode_files = _run_episodes(config, env, prior, dyn, planner_config, run_dir)
    files += episode_files
    rows.append(_iteration_row(n_iterations, episodes, dataset.n_transitions))
    metrics, summary, paths = _write_metrics(run_dir, episodes)
    files += paths
    if n_iterations:
        save_dynamics(dyn, run_dir / "dynamics_fewshot.rmdy")
        save_dataset(dataset, run_dir / "dataset_fewshot.rmpd")
        files += [run_dir / "dynamics_fewshot.rmdy", run_dir / "dataset_fewshot.rmpd"]
    files.append(run_dir / "fewshot.csv")
    write_table(pd.DataFrame(rows), files[-1])
    write_manifest(run_dir, "fewshot", config.config_hash, config.seed, files)
    return RunResult(run_dir, metrics, summary, files)


def _iteration_row(iteration: int, episodes: list[EpisodeMetrics], n_transitions: int) -> dict:
    frame = metrics_frame(episodes).drop(columns=["episode"])
    row = {"iteration": iteration, "dataset_transitions": n_transitions}
    row.update({f"{c}_mean": frame[c].mean() for c in frame.columns})
    return row


def cmd_oracle_check(fixtures=None, report_path=None):
    """Run the fixture suite; any failure or unexpected pass is a violation."""
    fixtures = Path(fixtures) if fixtures is not None else DEFAULT_FIXTURES
    cases = load_fixture_suite(fixtures)
    report = run_fixture_suite(cases)
    if report_path is not None:
        write_report(report, report_path)
    if report.violations:
        details = "; ".join(
            f"{r.name}: {r.status} (TV {r.measured:.3e}, tolerance {r.tolerance:.1e})"
            for r in report.violations
        )
        raise AcceptanceViolation(f"Oracle check failed: {details}")
    return report


def cmd_ablate(config: ExperimentConfig, key: str, values: list[str]) -> pd.DataFrame:
    """Re-run the experiment once per value of a single planner key."""
    section, _, name = key.partition(".")
    if section != "planner" or not name:
        raise ConfigError(f"Only planner keys can be ablated, got '{key}'")
    if not values:
        raise ConfigError("Nothing to ablate, no values given")
    base_dir = config.output_dir
    rows = []
    for value in values:
        point = config.with_overrides([f"planner.{name}={value}", f"run.output_dir={base_dir / f'{name}_{value}'}"])
        logger.info("Ablation %s = %s", key, value)
        result = cmd_run(point)
        row = {"key": key, "value": value}
        for metric, mean, std in result.summary.itertuples(index=False):
            row[f"{metric}_mean"] = mean
            row[f"{metric}_std"] = std
        rows.append(row)
    table = pd.DataFrame(rows)
    write_table(table, base_dir / "ablation.csv")
    return table
