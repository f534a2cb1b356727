"""Experiment configuration files.

An experiment is one INI file with the sections ``[env]``, ``[prior]``,
``[dynamics]``, ``[planner]`` and ``[run]``. Every key is declared in
``SCHEMA`` with a parser and a default; anything undeclared is an error.
"""

import configparser
import hashlib
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

import rmppi
from rmppi.errors import ArtifactIOError, ConfigError
from rmppi.planner.config import DYNAMICS_PRESETS, PLANNER_PRESETS, PlannerConfig

logger = logging.getLogger(__name__)

REQUIRED = object()
# excluded from the config hash, they do not change what an experiment computes
UNHASHED = {("run", "seed"), ("run", "output_dir")}


def _bool(text: str) -> bool:
    value = text.strip().lower()
    if value in ("1", "yes", "true", "on"):
        return True
    if value in ("0", "no", "false", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(",", " ").split())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.replace(",", " ").split())


def _matrix(text: str) -> np.ndarray:
    """Rows separated by ``;``, entries by spaces or commas."""
    rows = [_floats(row) for row in text.split(";") if row.strip()]
    if not rows or len({len(r) for r in rows}) != 1:
        raise ValueError(f"ragged or empty matrix: {text!r}")
    return np.array(rows)


def _optional_float(text: str) -> float | None:
    return None if text.strip().lower() in ("", "none") else float(text)


def _str(text: str) -> str:
    return text.strip()


SCHEMA: dict[str, dict[str, tuple]] = {
    "env": {
        "id": (_str, REQUIRED),
        "omega": (float, None),
        "horizon_limit": (int, None),
        "dt": (float, None),
        "track": (_str, None),
        "initial_state": (_floats, None),
        "jitter": (float, 0.0),
        "max_accel": (float, None),
        "max_torque": (float, None),
        "max_speed": (float, None),
        "max_position": (float, None),
        "addon_gain": (float, None),
        "max_steer": (float, None),
        "wheelbase": (float, None),
        "off_course_coefficient": (float, None),
    },
    "prior": {
        "type": (_str, "zero"),
        "variance": (_floats, (0.25,)),
        "gain": (_matrix, None),
        "offset": (_floats, None),
        "weights": (_str, None),
        "table": (_str, None),
        "lookahead": (float, 6.0),
        "target_speed": (float, 8.0),
        "speed_gain": (float, 1.0),
        "apex_gain": (float, 0.0),
        "alpha": (float, 1.0),
        "gamma": (float, 0.95),
        "grid_low": (_floats, None),
        "grid_high": (_floats, None),
        "grid_bins": (_ints, None),
        "action_values": (_matrix, None),
        "smoothing_sigma": (float, 0.0),
    },
    "dynamics": {
        "use_true_dynamics": (_bool, False),
        "preset": (_str, "desk"),
        "hidden": (_ints, None),
        "activation": (_str, None),
        "learning_rate": (float, None),
        "batch_size": (int, None),
        "window": (int, None),
        "gamma": (float, None),
        "steps": (int, 2000),
        "dataset_steps": (int, None),
        "exploration_sigma": (_floats, (0.1,)),
        "heldout_fraction": (float, 0.2),
        "new_data_only": (_bool, False),
        "model": (_str, None),
    },
    "planner": {
        "preset": (_str, None),
        "variant": (_str, None),
        "samples": (int, None),
        "horizon": (int, None),
        "sigma": (_floats, None),
        "temperature": (float, None),
        "gamma": (float, None),
        "omega_prime": (float, None),
        "omega": (_optional_float, None),
        "top_ratio": (float, None),
        "include_nominal": (_bool, None),
        "terminal": (_str, "zero"),
    },
    "run": {
        "seed": (int, REQUIRED),
        "n_episodes": (int, 200),
        "n_steps": (int, None),
        "output_dir": (_str, None),
        "plots": (_bool, False),
        "diagnostics": (_bool, None),
    },
}

# keys whose values name files, resolved against the config file's directory
PATH_KEYS = {("env", "track"), ("prior", "weights"), ("prior", "table")}
PLANNER_KEYS = {
    "variant",
    "samples",
    "horizon",
    "sigma",
    "temperature",
    "gamma",
    "omega_prime",
    "omega",
    "top_ratio",
    "include_nominal",
}


def parse_override(text: str) -> tuple[str, str, str]:
    """Split ``section.key=value``."""
    name, sep, value = text.partition("=")
    section, dot, key = name.strip().partition(".")
    if not sep or not dot or not section or not key:
        raise ConfigError(f"Override must look like section.key=value, got {text!r}")
    return section, key, value.strip()


@dataclass(eq=False)
class ExperimentConfig:
    path: Path | None
    values: dict[str, dict]
    given: dict[str, dict[str, str]]

    @property
    def env(self) -> dict:
        return self.values["env"]

    @property
    def prior(self) -> dict:
        return self.values["prior"]

    @property
    def dynamics(self) -> dict:
        return self.values["dynamics"]

    @property
    def planner(self) -> dict:
        return self.values["planner"]

    @property
    def run(self) -> dict:
        return self.values["run"]

    @property
    def seed(self) -> int:
        return self.run["seed"]

    @property
    def config_hash(self) -> str:
        lines = [
            f"{section}.{key}={self._hash_value(section, key)}"
            for section in sorted(self.given)
            for key in sorted(self.given[section])
            if (section, key) not in UNHASHED
        ]
        return hashlib.sha256("\n".join(lines).encode("utf-8")).hexdigest()

    def _hash_value(self, section: str, key: str) -> str:
        # file references hash by their written form, not the machine-local absolute path
        if (section, key) in PATH_KEYS:
            return self.given[section][key].strip()
        return _normalise(self.values[section][key])

    @property
    def output_dir(self) -> Path:
        if self.run["output_dir"]:
            return Path(self.run["output_dir"])
        base = Path(rmppi.config.get("paths", "output_dir", fallback="runs"))
        stem = self.path.stem if self.path is not None else "experiment"
        return base / stem

    def planner_config(self, **overrides) -> PlannerConfig:
        block = self.planner
        settings = dict(PLANNER_PRESETS[block["preset"]]) if block["preset"] else {}
        settings.update({k: block[k] for k in PLANNER_KEYS if block[k] is not None})
        settings.update(overrides)
        settings.setdefault("seed", self.seed)
        return PlannerConfig(**settings)

    def dynamics_settings(self) -> dict:
        """The dynamics block layered over its named preset."""
        block = self.dynamics
        preset = block["preset"]
        if preset not in DYNAMICS_PRESETS:
            raise ConfigError(
                f"Unknown dynamics preset '{preset}', expected one of {', '.join(DYNAMICS_PRESETS)}"
            )
        settings = dict(DYNAMICS_PRESETS[preset])
        settings.update({k: v for k, v in block.items() if v is not None and k != "preset"})
        return settings

    def with_overrides(self, overrides: list[str]) -> "ExperimentConfig":
        given = {s: dict(keys) for s, keys in self.given.items()}
        for text in overrides:
            section, key, value = parse_override(text)
            given.setdefault(section, {})[key] = value
        return build_config(given, self.path)


def _normalise(value) -> str:
    if isinstance(value, np.ndarray):
        return ";".join(" ".join(repr(float(v)) for v in row) for row in value)
    if isinstance(value, tuple):
        return " ".join(repr(v) for v in value)
    return repr(value)


def build_config(given: dict[str, dict[str, str]], path: Path | None = None) -> ExperimentConfig:
    """Validate raw string values against ``SCHEMA`` and fill defaults."""
    unknown = set(given) - set(SCHEMA)
    if unknown:
        raise ConfigError(f"Unknown config sections: {', '.join(sorted(unknown))}")
    base = path.parent if path is not None else Path.cwd()
    values = {}
    for section, keys in SCHEMA.items():
        raw = given.get(section, {})
        unknown = set(raw) - set(keys)
        if unknown:
            raise ConfigError(f"Unknown keys in [{section}]: {', '.join(sorted(unknown))}")
        block = {}
        for key, (parse, default) in keys.items():
            if key not in raw:
                if default is REQUIRED:
                    raise ConfigError(f"[{section}] {key} is required")
                block[key] = default
                continue
            try:
                block[key] = parse(raw[key])
            except ValueError as e:
                raise ConfigError(f"[{section}] {key}: {e}") from e
            if (section, key) in PATH_KEYS:
                resolved = (base / block[key]).resolve()
                if not resolved.exists():
                    raise ConfigError(f"[{section}] {key}: {resolved} does not exist")
                block[key] = resolved
        values[section] = block
    if values["planner"]["preset"] and values["planner"]["preset"] not in PLANNER_PRESETS:
        raise ConfigError(
            f"Unknown planner preset '{values['planner']['preset']}', "
            f"expected one of {', '.join(PLANNER_PRESETS)}"
        )
    return ExperimentConfig(path, values, {s: dict(k) for s, k in given.items()})


def load_experiment(path, overrides: list[str] = (), seed: int | None = None) -> ExperimentConfig:
    path = Path(path)
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with path.open() as f:
            parser.read_file(f)
    except OSError as e:
        raise ArtifactIOError(path, f"cannot read experiment config ({e.strerror})") from e
    except configparser.Error as e:
        raise ConfigError(f"{path}: {e}") from e
    given = {s: dict(parser.items(s)) for s in parser.sections()}
    for text in overrides:
        section, key, value = parse_override(text)
        given.setdefault(section, {})[key] = value
    if seed is not None:
        given.setdefault("run", {})["seed"] = str(seed)
    config = build_config(given, path)
    logger.debug("Loaded experiment %s (hash %s)", path, config.config_hash[:12])
    return config
