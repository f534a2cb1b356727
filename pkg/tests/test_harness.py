import json
import shutil

import numpy as np
import pandas as pd
import pytest

from conftest import CONFIGS, FIXTURES, ROOT
from rmppi.dynamics import TrainingReport
from rmppi.envs import PointMass, circle_track, make_env
from rmppi.errors import AcceptanceViolation, ArtifactIOError, ConfigError, DatasetMismatchError
from rmppi.harness import (
    build_env,
    build_prior,
    cmd_ablate,
    cmd_fewshot,
    cmd_oracle_check,
    cmd_run,
    cmd_train_dynamics,
    load_experiment,
    parse_override,
    read_trajectory,
    summarize,
    write_manifest,
    write_trajectory,
)
from rmppi.harness.io import plot_training_curve, plot_trajectory
from rmppi.harness.pipeline import build_terminal
from rmppi.mdp import ActionGrid, StateGrid
from rmppi.oracle import GridSpec, augmented_optimal_action, discretize_env
from rmppi.planner import Planner, Variant, planner_preset, receding_horizon_run
from rmppi.priors import GaussianPolicy, LinearFeedback

QUICK = ["dynamics.use_true_dynamics=true", "run.n_episodes=2", "run.n_steps=5", "planner.samples=16"]
SMALL_MODEL = [
    "dynamics.dataset_steps=300",
    "dynamics.steps=20",
    "dynamics.hidden=8",
    "dynamics.batch_size=16",
    "dynamics.window=3",
    "run.n_episodes=1",
    "run.n_steps=5",
    "planner.samples=16",
]


def write_ini(tmp_path, text, name="experiment.ini"):
    path = tmp_path / name
    path.write_text(text)
    return path


def point_mass(tmp_path, *overrides, out="run"):
    return load_experiment(
        CONFIGS / "point_mass.ini", [*overrides, f"run.output_dir={tmp_path / out}"]
    )


# configuration


def test_parse_override():
    assert parse_override("planner.samples = 8") == ("planner", "samples", "8")
    assert parse_override("run.output_dir=a=b") == ("run", "output_dir", "a=b")
    for bad in ("samples=8", "planner.samples", ".samples=1"):
        with pytest.raises(ConfigError):
            parse_override(bad)


def test_load_point_mass_experiment():
    config = load_experiment(CONFIGS / "point_mass.ini")
    assert config.env["id"] == "point_mass"
    assert config.prior["gain"].shape == (2, 4)
    assert config.prior["offset"] == (1.0, 0.0)
    pc = config.planner_config()
    assert pc.variant is Variant.RESIDUAL
    assert (pc.samples, pc.horizon, pc.omega_prime) == (256, 10, 0.05)
    assert pc.seed == 0
    assert config.planner_config(samples=8).samples == 8
    assert load_experiment(CONFIGS / "point_mass.ini", seed=5).seed == 5


def test_dynamics_settings_layer_over_the_preset():
    config = load_experiment(CONFIGS / "point_mass.ini")
    settings = config.dynamics_settings()
    assert settings["hidden"] == (64, 64)
    assert settings["dataset_steps"] == 5000
    assert settings["steps"] == 1500
    broken = load_experiment(CONFIGS / "point_mass.ini", ["dynamics.preset=huge"])
    with pytest.raises(ConfigError, match="dynamics preset"):
        broken.dynamics_settings()


def test_config_hash_ignores_seed_and_output():
    base = load_experiment(CONFIGS / "point_mass.ini")
    assert len(base.config_hash) == 64
    assert load_experiment(CONFIGS / "point_mass.ini", ["run.output_dir=elsewhere"], seed=9).config_hash == base.config_hash
    assert load_experiment(CONFIGS / "point_mass.ini", ["planner.samples=8"]).config_hash != base.config_hash


def test_file_references_resolve_and_hash_as_written(tmp_path):
    original = load_experiment(CONFIGS / "car.ini")
    assert original.env["track"].is_absolute() and original.env["track"].exists()
    for folder in ("configs", "tracks"):
        (tmp_path / folder).mkdir()
    shutil.copy(CONFIGS / "car.ini", tmp_path / "configs" / "car.ini")
    shutil.copy(ROOT / "tracks" / "stadium.txt", tmp_path / "tracks" / "stadium.txt")
    moved = load_experiment(tmp_path / "configs" / "car.ini")
    assert moved.env["track"] != original.env["track"]
    assert moved.config_hash == original.config_hash


@pytest.mark.parametrize(
    "text, message",
    [
        ("[env]\nid = point_mass\n", "seed is required"),
        ("[env]\nid = point_mass\n[run]\nseed = 0\n[planner]\nbeam = 3\n", "Unknown keys in \\[planner\\]"),
        ("[env]\nid = point_mass\n[run]\nseed = 0\n[extras]\na = 1\n", "Unknown config sections"),
        ("[env]\nid = point_mass\n[run]\nseed = 0\nplots = maybe\n", "plots"),
        ("[env]\nid = point_mass\n[run]\nseed = 0\n[prior]\ngain = 1 2; 3\n", "gain"),
        ("[env]\nid = point_mass\n[run]\nseed = 0\n[planner]\npreset = walker\n", "planner preset"),
        ("[env]\nid = car\ntrack = nowhere.txt\n[run]\nseed = 0\n", "does not exist"),
        ("[env\nid = car\n", ""),
    ],
)
def test_config_errors(tmp_path, text, message):
    with pytest.raises(ConfigError, match=message):
        load_experiment(write_ini(tmp_path, text))


def test_missing_config_file(tmp_path):
    with pytest.raises(ArtifactIOError):
        load_experiment(tmp_path / "absent.ini")


def test_default_output_dir(app_config, tmp_path):
    config = load_experiment(CONFIGS / "point_mass.ini")
    assert config.output_dir == tmp_path / "runs" / "point_mass"
    assert point_mass(tmp_path).output_dir == tmp_path / "run"


# artifacts


@pytest.fixture
def trajectory():
    env = PointMass()
    prior = GaussianPolicy(LinearFeedback(np.array([[0.0, 0.0, -1.0, 0.0], [0.0, 0.0, 0.0, -1.0]]), [1.0, 0.0]), 0.25)
    planner = Planner(planner_preset("point_mass", samples=16), env, prior)
    traj, _ = receding_horizon_run(planner, env, np.array([0.0, 0.0, 0.2, 0.0]), 4)
    return traj


def test_trajectory_file(tmp_path, trajectory):
    write_trajectory(trajectory, tmp_path / "traj.csv")
    lines = (tmp_path / "traj.csv").read_text().splitlines()
    assert lines[0].startswith("# units: count,m,m,m/s,m/s,m/s^2")
    assert lines[1].startswith("step,state.px,state.py,state.vx,state.vy,action.ax,action.ay,next.px")
    loaded = read_trajectory(tmp_path / "traj.csv")
    np.testing.assert_allclose(loaded.states, trajectory.states, atol=1e-8)
    np.testing.assert_allclose(loaded.actions, trajectory.actions, atol=1e-8)
    np.testing.assert_allclose(loaded.addon, trajectory.addon, atol=1e-8)
    assert loaded.state_labels == ("px", "py", "vx", "vy")
    assert loaded.action_units == ("m/s^2", "m/s^2")
    assert len(loaded.diagnostics) == 4
    assert loaded.diagnostics[2]["beta"] == pytest.approx(trajectory.diagnostics[2]["beta"], abs=1e-8)


def test_empty_trajectory_file(tmp_path, trajectory):
    empty = type(trajectory)(trajectory.states[:1], np.zeros((0, 2)), np.zeros(0), np.zeros(0))
    write_trajectory(empty, tmp_path / "empty.csv")
    loaded = read_trajectory(tmp_path / "empty.csv")
    assert loaded.n_steps == 0
    assert loaded.actions.shape == (0, 2)


def test_plots_are_png_files(tmp_path, trajectory):
    curve = tmp_path / "plots" / "training.png"
    plot_training_curve(TrainingReport(losses=[1.0, 0.5, 0.25]), curve)
    path = tmp_path / "plots" / "episode.png"
    plot_trajectory(trajectory, PointMass(), path)
    for png in (curve, path):
        assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    car = make_env("car", circle_track(15.0))
    plot_trajectory(trajectory, car, tmp_path / "car.png")
    assert (tmp_path / "car.png").exists()


def test_summarize_uses_population_std():
    frame = pd.DataFrame({"episode": [0, 1], "total_reward": [1.0, 3.0], "off_course_steps": [0, 4]})
    summary = summarize(frame)
    assert list(summary["metric"]) == ["total_reward", "off_course_steps"]
    np.testing.assert_allclose(summary["mean"], [2.0, 2.0])
    np.testing.assert_allclose(summary["std"], [1.0, 2.0])


def test_manifest(tmp_path):
    files = [tmp_path / "b.csv", tmp_path / "sub" / "a.csv"]
    path = write_manifest(tmp_path, "run", "f" * 64, 3, files)
    manifest = json.loads(path.read_text())
    assert manifest["command"] == "run" and manifest["seed"] == 3
    assert manifest["files"] == ["b.csv", "sub/a.csv"]


# builders


def test_build_env_applies_overrides(tmp_path):
    config = point_mass(tmp_path, "env.dt=0.05", "env.initial_state=1 2 0 0")
    env = build_env(config)
    assert env.spec.dt == 0.05
    np.testing.assert_array_equal(env.reset(), [1.0, 2.0, 0.0, 0.0])


def test_build_prior_types(tmp_path):
    config = point_mass(tmp_path, "prior.type=zero")
    env = build_env(config)
    np.testing.assert_array_equal(build_prior(config, env).policy.mode(np.ones(4)), [0.0, 0.0])
    np.testing.assert_allclose(build_prior(point_mass(tmp_path), env).policy.mode(np.zeros(4)), [1.0, 0.0])
    for overrides, message in [
        (["prior.type=track_follower"], "car"),
        (["prior.type=mlp"], "weights"),
        (["prior.type=soft_q"], "grid_low"),
        (["prior.type=bandit"], "Unknown prior type"),
    ]:
        with pytest.raises(ConfigError, match=message):
            build_prior(point_mass(tmp_path, *overrides), env)
    config = load_experiment(CONFIGS / "point_mass.ini", ["prior.type=linear_feedback"])
    config.prior["gain"] = None
    with pytest.raises(ConfigError, match="gain"):
        build_prior(config, env)


def test_mlp_prior_from_weight_file(tmp_path):
    path = write_ini(
        tmp_path,
        f"[env]\nid = pendulum\n[prior]\ntype = mlp\nweights = {FIXTURES / 'reference_mlp.rmnn'}\n[run]\nseed = 0\n",
    )
    config = load_experiment(path)
    prior = build_prior(config, build_env(config))
    np.testing.assert_allclose(prior.policy.mode(np.array([1.0, 0.5])), [2.75])


def test_soft_q_prior_and_terminal_value(tmp_path):
    path = write_ini(
        tmp_path,
        "[env]\nid = pendulum\n"
        "[prior]\ntype = soft_q\nalpha = 1.0\ngamma = 0.9\n"
        "grid_low = -3.141592653589793 -8\ngrid_high = 3.141592653589793 8\n"
        "grid_bins = 9 9\naction_values = -2 0 2\n"
        "[planner]\nterminal = soft_value\n[run]\nseed = 0\n",
    )
    config = load_experiment(path)
    bundle = build_prior(config, build_env(config))
    assert bundle.table is bundle.policy
    assert bundle.table.q_table.shape == (81, 3)
    value = build_terminal(config, bundle)
    assert value(np.zeros((3, 2))).shape == (3,)
    assert np.all(np.isfinite(value(np.zeros((3, 2)))))

    smoothed = load_experiment(path, ["prior.smoothing_sigma=0.3"])
    bundle = build_prior(smoothed, build_env(smoothed))
    assert isinstance(bundle.policy, GaussianPolicy) and bundle.table is not None

    linear = load_experiment(CONFIGS / "point_mass.ini", ["planner.terminal=soft_value"])
    with pytest.raises(ConfigError, match="soft_q"):
        build_terminal(linear, build_prior(linear, build_env(linear)))
    np.testing.assert_array_equal(build_terminal(load_experiment(CONFIGS / "point_mass.ini"), None)(np.ones((2, 4))), 0.0)


# commands


def test_run_writes_a_reproducible_run_directory(tmp_path):
    result = cmd_run(point_mass(tmp_path, *QUICK))
    run_dir = tmp_path / "run"
    assert len(result.metrics) == 2
    assert {"episode", "total_reward", "basic_reward", "addon_reward", "degraded_planner_steps"} <= set(result.metrics.columns)
    manifest = json.loads((run_dir / "manifest.json").read_text())
    assert manifest["command"] == "run"
    assert manifest["files"] == sorted(
        [
            "metrics.csv",
            "summary.csv",
            "trajectories/episode_0000.csv",
            "trajectories/episode_0001.csv",
        ]
    )
    assert read_trajectory(run_dir / "trajectories" / "episode_0001.csv").n_steps == 5
    again = cmd_run(point_mass(tmp_path, *QUICK, out="again"))
    pd.testing.assert_frame_equal(result.metrics, again.metrics)


def test_run_with_diagnostics_and_the_prior_variant(tmp_path):
    result = cmd_run(point_mass(tmp_path, *QUICK, "run.diagnostics=true"))
    lines = (tmp_path / "run" / "diagnostics.jsonl").read_text().splitlines()
    assert len(lines) == 10
    assert any(str(f).endswith("diagnostics.jsonl") for f in result.files)
    prior_only = cmd_run(point_mass(tmp_path, *QUICK, out="prior"), variant="prior")
    assert prior_only.metrics["degraded_planner_steps"].sum() == 0


def test_prior_run_matches_the_golden_trajectory(tmp_path):
    # x velocity relaxes as vx <- 0.9 vx + 0.1 from rest, y stays put
    config = point_mass(
        tmp_path, "env.jitter=0", "dynamics.use_true_dynamics=true", "run.n_episodes=1", "run.n_steps=4"
    )
    result = cmd_run(config, variant="prior")
    (written,) = [f for f in result.files if f.name == "episode_0000.csv"]
    assert written.read_bytes() == (FIXTURES / "point_mass_golden.csv").read_bytes()


def test_run_needs_a_trained_model(tmp_path):
    with pytest.raises(ArtifactIOError, match="train-dynamics"):
        cmd_run(point_mass(tmp_path, "run.n_episodes=1"))


def test_train_then_plan_then_fewshot(tmp_path):
    config = point_mass(tmp_path, *SMALL_MODEL)
    trained = cmd_train_dynamics(config)
    run_dir = tmp_path / "run"
    assert trained.model_path == run_dir / "dynamics.rmdy" and trained.model_path.exists()
    assert len(trained.losses) == 20
    assert len(pd.read_csv(run_dir / "training.csv")) == 20
    assert list(pd.read_csv(run_dir / "open_loop_error.csv")["dimension"]) == ["px", "py", "vx", "vy"]
    assert json.loads((run_dir / "manifest.json").read_text())["command"] == "train-dynamics"

    planned = cmd_run(config)
    # zero iterations is a plain evaluation with the trained model
    unchanged = cmd_fewshot(config, 0)
    pd.testing.assert_frame_equal(planned.metrics, unchanged.metrics)
    assert not (run_dir / "dynamics_fewshot.rmdy").exists()

    tuned = cmd_fewshot(config, 1)
    table = pd.read_csv(run_dir / "fewshot.csv")
    assert list(table["iteration"]) == [0, 1]
    assert list(table["dataset_transitions"]) == [305, 305]
    assert "total_reward_mean" in table.columns
    assert (run_dir / "dynamics_fewshot.rmdy").exists()
    assert (run_dir / "trajectories" / "episode_0000_iter01.csv").exists()
    assert len(tuned.metrics) == 1

    with pytest.raises(ConfigError):
        cmd_fewshot(config, -1)


def test_training_is_byte_reproducible(tmp_path):
    first = cmd_train_dynamics(point_mass(tmp_path, *SMALL_MODEL, out="a"))
    second = cmd_train_dynamics(point_mass(tmp_path, *SMALL_MODEL, out="b"))
    assert first.model_path.read_bytes() == second.model_path.read_bytes()
    assert (tmp_path / "a" / "training.csv").read_bytes() == (tmp_path / "b" / "training.csv").read_bytes()


def test_model_commands_refuse_true_dynamics(tmp_path):
    config = point_mass(tmp_path, *QUICK)
    with pytest.raises(ConfigError):
        cmd_train_dynamics(config)
    with pytest.raises(ConfigError):
        cmd_fewshot(config, 1)


def test_fewshot_rejects_a_foreign_dataset(tmp_path):
    config = point_mass(tmp_path, *SMALL_MODEL)
    cmd_train_dynamics(config)
    other = point_mass(tmp_path, *SMALL_MODEL, "planner.horizon=4")
    with pytest.raises(DatasetMismatchError):
        cmd_fewshot(other, 1)


def test_ablation_over_one_planner_key(tmp_path):
    table = cmd_ablate(point_mass(tmp_path, *QUICK), "planner.samples", ["4", "8"])
    assert list(table["value"]) == ["4", "8"]
    assert {"total_reward_mean", "total_reward_std"} <= set(table.columns)
    assert (tmp_path / "run" / "samples_4" / "metrics.csv").exists()
    assert (tmp_path / "run" / "ablation.csv").exists()
    with pytest.raises(ConfigError):
        cmd_ablate(point_mass(tmp_path, *QUICK), "run.seed", ["1"])
    with pytest.raises(ConfigError):
        cmd_ablate(point_mass(tmp_path, *QUICK), "planner.samples", [])


def test_oracle_check(tmp_path):
    report = cmd_oracle_check(FIXTURES / "oracle_suite.json", tmp_path / "report.json")
    assert report.ok
    assert json.loads((tmp_path / "report.json").read_text())["ok"] is True
    suite = {"cases": [{"name": "wrong-weight", "kind": "rql", "seed": 3, "count": 2, "omega_prime": 100.0}]}
    (tmp_path / "bad.json").write_text(json.dumps(suite))
    with pytest.raises(AcceptanceViolation, match="wrong-weight"):
        cmd_oracle_check(tmp_path / "bad.json")


# desk-scale reference runs


@pytest.mark.slow
@pytest.mark.parametrize("omega_prime", [None, 50.0], ids=["addon-led", "prior-led"])
def test_planner_agrees_with_the_augmented_task_oracle(omega_prime):
    config = load_experiment(CONFIGS / "point_mass_1d.ini")
    env = build_env(config)
    bundle = build_prior(config, env)
    block = config.prior
    grid = GridSpec(
        StateGrid(np.asarray(block["grid_low"]), np.asarray(block["grid_high"]), block["grid_bins"]),
        ActionGrid(tuple(np.asarray(row) for row in block["action_values"])),
    )
    mdp = discretize_env(env, grid)
    pc = config.planner_config() if omega_prime is None else config.planner_config(omega_prime=omega_prime)
    x0 = env.reset()
    best, _ = augmented_optimal_action(
        mdp, bundle.table, mdp.addon, pc.omega_prime, pc.temperature, x0, pc.horizon, pc.gamma
    )
    # at rest the prior holds still, the add-on pushes the oracle off that choice
    prior_mode = int(np.argmax(bundle.table.probabilities(x0)))
    assert prior_mode == 2
    assert best == (4 if omega_prime is None else 2)

    accels = grid.actions.values[0]
    first = np.array(
        [Planner(pc.with_overrides(seed=s), env, bundle.policy).plan(x0)[0, 0] for s in range(2000)]
    )
    cells = np.argmin(np.abs(accels[None, :] - env.clamp(first[:, None])), axis=1)
    modal = int(np.bincount(cells, minlength=len(accels)).argmax())
    assert modal == best


def means(result):
    return result.summary.set_index("metric")["mean"]


@pytest.mark.slow
def test_learned_dynamics_plan_like_the_true_ones(tmp_path):
    config = point_mass(tmp_path, "run.n_episodes=5")
    trained = cmd_train_dynamics(config)
    assert trained.heldout_median.shape == (4,)
    assert np.all(trained.heldout_median < 1e-3)
    learned = means(cmd_run(config))
    true = means(cmd_run(point_mass(tmp_path, "run.n_episodes=5", "dynamics.use_true_dynamics=true", out="true")))
    assert abs(learned["total_reward"] - true["total_reward"]) < 0.05 * abs(true["total_reward"])


@pytest.mark.slow
def test_residual_beats_greedy_on_the_point_mass(tmp_path):
    config = point_mass(tmp_path, "dynamics.use_true_dynamics=true", "run.n_episodes=200")
    residual = means(cmd_run(config))
    greedy = means(cmd_run(config, variant="greedy"))
    assert residual["total_reward"] >= greedy["total_reward"]


@pytest.mark.slow
def test_residual_planning_keeps_the_car_on_course(tmp_path):
    base = load_experiment(
        CONFIGS / "car.ini",
        ["dynamics.use_true_dynamics=true", "run.n_episodes=2", "run.n_steps=400", f"run.output_dir={tmp_path}"],
    )
    prior = means(cmd_run(base, variant="prior"))
    residual = means(cmd_run(base))
    assert prior["off_course_steps"] > 0
    assert residual["off_course_steps"] <= 0.2 * prior["off_course_steps"]
    assert prior["lap_time_steps"] > 0 and residual["lap_time_steps"] > 0
    assert residual["lap_time_steps"] <= 1.1 * prior["lap_time_steps"]


@pytest.mark.slow
def test_fewshot_does_not_leave_the_course_more_than_zero_shot(tmp_path):
    config = load_experiment(
        CONFIGS / "car.ini",
        ["run.n_episodes=2", "run.n_steps=400", "run.plots=false", f"run.output_dir={tmp_path}"],
    )
    cmd_train_dynamics(config)
    zero_shot = means(cmd_run(config))
    few_shot = means(cmd_fewshot(config, 1))
    assert few_shot["off_course_steps"] <= zero_shot["off_course_steps"]
