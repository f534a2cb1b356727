import configparser
import json

import pytest
from click.testing import CliRunner

import rmppi
from conftest import CONFIGS, FIXTURES
from rmppi.cli import cli

QUICK = [
    "--set",
    "dynamics.use_true_dynamics=true",
    "--set",
    "run.n_episodes=1",
    "--set",
    "run.n_steps=3",
    "--set",
    "planner.samples=8",
]


@pytest.fixture
def runner():
    return CliRunner()


def test_presets(runner):
    result = runner.invoke(cli, ["presets"])
    assert result.exit_code == 0
    assert "Planner presets" in result.output
    assert "Dynamics presets" in result.output
    assert "gts" in result.output


def test_run(runner, tmp_path):
    out = tmp_path / "run"
    result = runner.invoke(
        cli, ["run", "--config", str(CONFIGS / "point_mass.ini"), *QUICK, "--set", f"run.output_dir={out}", "--variant", "greedy"]
    )
    assert result.exit_code == 0, result.output
    assert "total_reward" in result.output
    assert json.loads((out / "manifest.json").read_text())["command"] == "run"


def test_oracle_check(runner, tmp_path):
    result = runner.invoke(cli, ["oracle-check", "--fixtures", str(FIXTURES / "oracle_suite.json")])
    assert result.exit_code == 0, result.output
    assert "6 fixture cases" in result.output


def test_acceptance_violation_exits_with_2(runner, tmp_path):
    suite = tmp_path / "suite.json"
    suite.write_text(json.dumps({"cases": [{"name": "off", "kind": "rql", "count": 1, "omega_prime": 50.0}]}))
    result = runner.invoke(cli, ["oracle-check", "--fixtures", str(suite)])
    assert result.exit_code == 2


def test_artifact_errors_exit_with_3(runner, tmp_path):
    result = runner.invoke(cli, ["run", "--config", str(tmp_path / "absent.ini")])
    assert result.exit_code == 3
    # learned dynamics requested, nothing trained yet
    result = runner.invoke(
        cli, ["run", "--config", str(CONFIGS / "point_mass.ini"), "--set", f"run.output_dir={tmp_path / 'run'}"]
    )
    assert result.exit_code == 3


def test_config_errors_exit_with_1(runner, tmp_path):
    result = runner.invoke(
        cli,
        ["run", "--config", str(CONFIGS / "point_mass.ini"), *QUICK, "--set", "planner.variant=cem", "--set", f"run.output_dir={tmp_path}"],
    )
    assert result.exit_code == 1
    result = runner.invoke(cli, ["fewshot", "--config", str(CONFIGS / "point_mass.ini"), "--iterations", "-1"])
    assert result.exit_code == 1


def test_unknown_variant_is_a_usage_error(runner):
    result = runner.invoke(cli, ["run", "--config", str(CONFIGS / "point_mass.ini"), "--variant", "cem"])
    assert result.exit_code == 2
    assert "Invalid value" in result.output


def test_config_get(runner, app_config):
    result = runner.invoke(cli, ["config", "paths.track_dir"])
    assert result.output.strip() == "paths.track_dir = tracks"
    result = runner.invoke(cli, ["config", "log_level"])
    assert "app.log_level" in result.output
    result = runner.invoke(cli, ["config", "app.colour"])
    assert "not found" in result.output
    result = runner.invoke(cli, ["config"])
    assert "[planner]" in result.output


def test_config_set_writes_the_app_file(runner, app_config, tmp_path):
    target = str(tmp_path / "elsewhere")
    result = runner.invoke(cli, ["config", "paths.output_dir", target])
    assert result.exit_code == 0
    saved = configparser.ConfigParser()
    saved.read(app_config / "config.ini")
    assert saved.get("paths", "output_dir") == target
    assert rmppi.config.get("paths", "output_dir") == target

    result = runner.invoke(cli, ["config", "paths.colour", "red"])
    assert "does not exist" in result.output


def test_ablate(runner, tmp_path):
    result = runner.invoke(
        cli,
        [
            "ablate",
            "--config",
            str(CONFIGS / "point_mass.ini"),
            "--key",
            "planner.samples",
            "--values",
            "4, 8",
            *QUICK,
            "--set",
            f"run.output_dir={tmp_path}",
        ],
    )
    assert result.exit_code == 0, result.output
    assert (tmp_path / "samples_4" / "manifest.json").exists()
    assert (tmp_path / "samples_8" / "manifest.json").exists()


def test_config_is_required(runner):
    result = runner.invoke(cli, ["run"])
    assert result.exit_code == 2
    assert "--config" in result.output


def test_train_dynamics_without_steps(runner, tmp_path):
    small = [
        "dynamics.dataset_steps=300",
        "dynamics.steps=0",
        "dynamics.hidden=8",
        "dynamics.batch_size=16",
        "dynamics.window=3",
        f"run.output_dir={tmp_path}",
    ]
    args = ["train-dynamics", "--config", str(CONFIGS / "point_mass.ini")]
    for item in small:
        args += ["--set", item]
    result = runner.invoke(cli, args)
    assert result.exit_code == 0, result.output
    assert "untrained, 0 steps" in result.output
    assert (tmp_path / "dynamics.rmdy").exists()
