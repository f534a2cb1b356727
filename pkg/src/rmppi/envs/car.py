import numpy as np

from rmppi.envs.base import Env, EnvSpec, wrap_angle
from rmppi.envs.track import CarTrack

# desk-scale default; the racing setup this mirrors used 1e6
DEFAULT_OFF_COURSE_COEFFICIENT = 1e4


class Car(Env):
    """Kinematic bicycle on a centerline track.

    State ``(x, y, heading, speed)``, action ``(steer, accel)``. The basic
    reward is centerline progress, the add-on reward penalises leaving the
    course: ``-C * relu(d_center**2 - d_map**2)`` at the current state.
    """

    control_cost = 0.01

    def __init__(
        self,
        track: CarTrack,
        dt: float = 0.1,
        omega: float = 1.0,
        horizon_limit: int = 400,
        wheelbase: float = 2.5,
        max_steer: float = 0.5,
        max_accel: float = 3.0,
        off_course_coefficient: float = DEFAULT_OFF_COURSE_COEFFICIENT,
        initial_state=None,
    ):
        if initial_state is None:
            (start,), (tangent,), _ = track.point_at(np.array([0.0]))
            heading = np.arctan2(tangent[1], tangent[0])
            initial_state = np.array([start[0], start[1], heading, 0.0])
        super().__init__(
            EnvSpec(
                name="car",
                state_dim=4,
                action_dim=2,
                action_low=np.array([-max_steer, -max_accel]),
                action_high=np.array([max_steer, max_accel]),
                dt=dt,
                omega=omega,
                horizon_limit=horizon_limit,
                angle_dims=(2,),
                state_labels=("x", "y", "heading", "speed"),
                state_units=("m", "m", "rad", "m/s"),
                action_labels=("steer", "accel"),
                action_units=("rad", "m/s^2"),
                initial_state=initial_state,
            )
        )
        self.track = track
        self.wheelbase = wheelbase
        self.off_course_coefficient = off_course_coefficient

    def _extra_identity(self):
        t = self.track
        return (
            self.wheelbase,
            self.off_course_coefficient,
            t.closed,
            t.centerline.tobytes(),
            t.half_width.tobytes(),
        )

    def _integrate(self, x, u):
        dt = self.spec.dt
        px, py, heading, v = x[..., 0], x[..., 1], x[..., 2], x[..., 3]
        steer, accel = u[..., 0], u[..., 1]
        return np.stack(
            [
                px + v * np.cos(heading) * dt,
                py + v * np.sin(heading) * dt,
                wrap_angle(heading + (v / self.wheelbase) * np.tan(steer) * dt),
                v + accel * dt,
            ],
            axis=-1,
        )

    def _basic(self, x, u, x_next):
        _, _, s0 = self.track.project(x[..., :2])
        _, _, s1 = self.track.project(x_next[..., :2])
        ds = self.track.progress(s0, s1)
        return ds / self.spec.dt - self.control_cost * np.sum(u * u, axis=-1)

    def _addon(self, x, u, x_next):
        d_center, d_map, _ = self.track.project(x[..., :2])
        return -self.off_course_coefficient * np.maximum(d_center**2 - d_map**2, 0.0)

    def off_course(self, x):
        d_center, d_map, _ = self.track.project(np.asarray(x)[..., :2])
        return d_center > d_map

    def counters(self, x) -> dict[str, int]:
        return {"off_course_steps": int(self.off_course(x))}

    def episode_summary(self, states) -> dict[str, int]:
        """Steps until the accumulated progress first covers one lap, -1 if never."""
        states = np.asarray(states)
        if len(states) < 2:
            return {"lap_time_steps": -1}
        _, _, s = self.track.project(states[:, :2])
        covered = np.cumsum(self.track.progress(s[:-1], s[1:]))
        done = np.nonzero(covered >= self.track.total_length)[0]
        return {"lap_time_steps": int(done[0]) + 1 if len(done) else -1}
