import numpy as np

from rmppi.envs.base import Env, EnvSpec


class PointMass(Env):
    """Planar point mass, state ``(px, py, vx, vy)`` and action ``(ax, ay)``.

    Explicit Euler with the position updated from the pre-step velocity.
    The basic task runs along x, the add-on task rewards motion along y.
    """

    control_cost = 0.1

    def __init__(
        self,
        dt: float = 0.1,
        omega: float = 1.0,
        horizon_limit: int = 100,
        max_accel: float = 1.0,
        initial_state=None,
    ):
        super().__init__(
            EnvSpec(
                name="point_mass",
                state_dim=4,
                action_dim=2,
                action_low=np.full(2, -max_accel),
                action_high=np.full(2, max_accel),
                dt=dt,
                omega=omega,
                horizon_limit=horizon_limit,
                state_labels=("px", "py", "vx", "vy"),
                state_units=("m", "m", "m/s", "m/s"),
                action_labels=("ax", "ay"),
                action_units=("m/s^2", "m/s^2"),
                initial_state=initial_state,
            )
        )

    def _integrate(self, x, u):
        dt = self.spec.dt
        pos = x[..., :2] + x[..., 2:] * dt
        vel = x[..., 2:] + u * dt
        return np.concatenate([pos, vel], axis=-1)

    def _basic(self, x, u, x_next):
        dx = (x_next[..., 0] - x[..., 0]) / self.spec.dt
        return dx - self.control_cost * np.sum(u * u, axis=-1)

    def _addon(self, x, u, x_next):
        return (x_next[..., 1] - x[..., 1]) / self.spec.dt
