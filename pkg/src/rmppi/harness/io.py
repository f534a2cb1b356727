"""Run-directory artifacts: trajectories, metrics tables, manifests and plots."""

import json
import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

import rmppi  # noqa: E402
from rmppi.errors import ArtifactIOError  # noqa: E402
from rmppi.planner.runner import EpisodeMetrics, Trajectory  # noqa: E402

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.9f"
DIAGNOSTIC_COLUMNS = ("beta", "eta", "effective_sample_size", "n_invalid", "degraded")


def _labels(prefix: str, labels, dim: int) -> list[str]:
    names = labels if len(labels) == dim else [str(i) for i in range(dim)]
    return [f"{prefix}.{name}" for name in names]


def _units(units, dim: int) -> list[str]:
    return list(units) if len(units) == dim else ["-"] * dim


def write_trajectory(traj: Trajectory, path):
    """One row per executed step, preceded by a commented units line.

    Columns: ``step``, the state before the step, the action, the state
    after it, both rewards and the planner diagnostics of that step.
    """
    path = Path(path)
    sd, ad = traj.states.shape[1], traj.actions.shape[1]
    state_cols = _labels("state", traj.state_labels, sd)
    action_cols = _labels("action", traj.action_labels, ad)
    next_cols = _labels("next", traj.state_labels, sd)
    columns = ["step", *state_cols, *action_cols, *next_cols, "basic", "addon", *DIAGNOSTIC_COLUMNS]
    units = (
        ["count"]
        + _units(traj.state_units, sd)
        + _units(traj.action_units, ad)
        + _units(traj.state_units, sd)
        + ["-", "-", "-", "-", "count", "count", "flag"]
    )
    n = traj.n_steps
    frame = pd.DataFrame(
        np.column_stack(
            [
                traj.states[:n],
                traj.actions,
                traj.states[1 : n + 1],
                traj.basic,
                traj.addon,
            ]
        ).reshape(n, 2 * sd + ad + 2),
        columns=[*state_cols, *action_cols, *next_cols, "basic", "addon"],
    )
    frame.insert(0, "step", np.arange(n))
    diagnostics = pd.DataFrame(list(traj.diagnostics), columns=DIAGNOSTIC_COLUMNS).reindex(range(n))
    for column in DIAGNOSTIC_COLUMNS:
        frame[column] = diagnostics[column].to_numpy(dtype=np.float64)
    frame = frame[columns]
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as f:
            f.write("# units: " + ",".join(units) + "\n")
            frame.to_csv(f, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    except OSError as e:
        raise ArtifactIOError(path, f"cannot write trajectory ({e.strerror})") from e


def read_trajectory(path) -> Trajectory:
    """Read a file written by ``write_trajectory``.

    A header-only file yields an empty trajectory without states.
    """
    path = Path(path)
    try:
        with path.open() as f:
            units = f.readline().removeprefix("# units: ").strip().split(",")
            frame = pd.read_csv(f)
    except OSError as e:
        raise ArtifactIOError(path, f"cannot read trajectory ({e.strerror})") from e
    cols = list(frame.columns)
    state_cols = [c for c in cols if c.startswith("state.")]
    action_cols = [c for c in cols if c.startswith("action.")]
    next_cols = [c for c in cols if c.startswith("next.")]
    sd, ad = len(state_cols), len(action_cols)
    before = frame[state_cols].to_numpy(dtype=np.float64)
    after = frame[next_cols].to_numpy(dtype=np.float64)
    states = np.concatenate([before, after[-1:]]) if len(frame) else before
    diagnostics = [
        {k: row[k] for k in DIAGNOSTIC_COLUMNS}
        for row in frame[list(DIAGNOSTIC_COLUMNS)].to_dict("records")
        if not np.isnan(row["beta"]) or not np.isnan(row["eta"])
    ]
    return Trajectory(
        states,
        frame[action_cols].to_numpy(dtype=np.float64).reshape(len(frame), ad),
        frame["basic"].to_numpy(dtype=np.float64),
        frame["addon"].to_numpy(dtype=np.float64),
        tuple(c.removeprefix("state.") for c in state_cols),
        tuple(units[1 : 1 + sd]),
        tuple(c.removeprefix("action.") for c in action_cols),
        tuple(units[1 + sd : 1 + sd + ad]),
        diagnostics,
    )


def metrics_frame(episodes: list[EpisodeMetrics], **extra) -> pd.DataFrame:
    frame = pd.DataFrame([m.as_row() for m in episodes])
    frame.insert(0, "episode", np.arange(len(episodes)))
    for i, (name, value) in enumerate(extra.items()):
        frame.insert(i, name, value)
    return frame


def summarize(frame: pd.DataFrame, exclude=("episode", "iteration")) -> pd.DataFrame:
    """Mean and population standard deviation of every metric column."""
    metrics = frame.drop(columns=[c for c in exclude if c in frame.columns])
    return pd.DataFrame(
        {
            "metric": metrics.columns,
            "mean": metrics.mean().to_numpy(),
            "std": metrics.std(ddof=0).to_numpy(),
        }
    )


def write_table(frame: pd.DataFrame, path):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    except OSError as e:
        raise ArtifactIOError(path, f"cannot write table ({e.strerror})") from e


def write_manifest(run_dir: Path, command: str, config_hash: str, seed: int, files: list[Path]):
    path = Path(run_dir) / "manifest.json"
    manifest = {
        "tool": "rmppi",
        "version": rmppi.__version__,
        "command": command,
        "config_hash": config_hash,
        "seed": seed,
        "files": sorted(str(Path(f).relative_to(run_dir)) for f in files),
    }
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(manifest, indent=2) + "\n")
    except OSError as e:
        raise ArtifactIOError(path, f"cannot write manifest ({e.strerror})") from e
    return path


def _save_figure(fig, path):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path, dpi=120)
    except OSError as e:
        raise ArtifactIOError(path, f"cannot write plot ({e.strerror})") from e
    finally:
        plt.close(fig)


def plot_training_curve(report, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(np.arange(1, len(report.losses) + 1), report.losses, linewidth=1.0)
    ax.set_yscale("log")
    ax.set_xlabel("Adam step")
    ax.set_ylabel("multi-step loss")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    _save_figure(fig, path)


def plot_trajectory(traj: Trajectory, env, path):
    fig, ax = plt.subplots(figsize=(6, 6))
    track = getattr(env, "track", None)
    if track is not None:
        pts = track.centerline
        _, tangent, _ = track.point_at(track.waypoint_s)
        normal = np.stack([-tangent[:, 1], tangent[:, 0]], axis=1)
        for side in (1.0, -1.0):
            border = pts + side * track.half_width[:, None] * normal
            border = np.concatenate([border, border[:1]]) if track.closed else border
            ax.plot(border[:, 0], border[:, 1], color="0.5", linewidth=0.8)
        ax.set_aspect("equal")
    x_label, y_label = (traj.state_labels + ("0", "1"))[:2]
    ax.plot(traj.states[:, 0], traj.states[:, 1], linewidth=1.2)
    ax.set_xlabel(x_label)
    ax.set_ylabel(y_label)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    _save_figure(fig, path)
