import logging
from pathlib import Path

from rmppi.envs.base import Env, EnvSpec, wrap_angle
from rmppi.envs.car import DEFAULT_OFF_COURSE_COEFFICIENT, Car
from rmppi.envs.line_mass import LineMass
from rmppi.envs.pendulum import Pendulum
from rmppi.envs.point_mass import PointMass
from rmppi.envs.track import (
    CarTrack,
    car_track_distance,
    circle_track,
    load_track,
    stadium_track,
    straight_track,
)
from rmppi.errors import ConfigError

logger = logging.getLogger(__name__)

ENV_IDS = ("point_mass", "point_mass_1d", "pendulum", "car")


def make_env(env_id: str, track: CarTrack | Path | str | None = None, **overrides) -> Env:
    """Build a registered environment.

    ``track`` only applies to the car; a path is loaded with ``load_track``
    and ``None`` falls back to the default stadium.
    """
    if env_id == "point_mass":
        cls = PointMass
    elif env_id == "point_mass_1d":
        cls = LineMass
    elif env_id == "pendulum":
        cls = Pendulum
    elif env_id == "car":
        if track is None:
            track = stadium_track()
        elif not isinstance(track, CarTrack):
            track = load_track(track)
        overrides["track"] = track
        cls = Car
    else:
        raise ConfigError(f"Unknown env '{env_id}', expected one of {ENV_IDS}")
    if track is not None and env_id != "car":
        raise ConfigError(f"Env '{env_id}' does not take a track")
    try:
        return cls(**overrides)
    except TypeError as e:
        raise ConfigError(f"Bad override for env '{env_id}': {e}") from e


def _resolve(env: Env | str) -> Env:
    return make_env(env) if isinstance(env, str) else env


def env_step(env: Env | str, x, u):
    return _resolve(env).step(x, u)


def env_basic_reward(env: Env | str, x, u):
    return _resolve(env).basic_reward(x, u)


def env_addon_reward(env: Env | str, x, u):
    return _resolve(env).addon_reward(x, u)


__all__ = [
    "DEFAULT_OFF_COURSE_COEFFICIENT",
    "ENV_IDS",
    "Car",
    "CarTrack",
    "Env",
    "EnvSpec",
    "LineMass",
    "Pendulum",
    "PointMass",
    "car_track_distance",
    "circle_track",
    "env_addon_reward",
    "env_basic_reward",
    "env_step",
    "load_track",
    "make_env",
    "stadium_track",
    "straight_track",
    "wrap_angle",
]
