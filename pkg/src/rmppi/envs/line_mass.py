import numpy as np

from rmppi.envs.base import Env, EnvSpec


class LineMass(Env):
    """Point mass on a bounded line, state ``(p, v)`` and action ``(a,)``.

    Explicit Euler with the position updated from the pre-step velocity, both
    clipped to the box ``|p| <= max_position``, ``|v| <= max_speed``. From a
    lattice point of spacing ``(max_accel * dt**2 / 2, max_accel * dt / 2)``
    every action in steps of ``max_accel / 2`` lands on another lattice point,
    so with the defaults a 21 x 21 grid discretizes it exactly.

    The basic task holds the mass at rest at the origin, the add-on task pays
    ``addon_gain`` per unit of velocity towards ``+p``.
    """

    control_cost = 1.0

    def __init__(
        self,
        dt: float = 0.5,
        omega: float = 1.0,
        horizon_limit: int = 60,
        max_accel: float = 1.0,
        max_position: float = 1.25,
        max_speed: float = 2.5,
        addon_gain: float = 20.0,
        initial_state=None,
    ):
        super().__init__(
            EnvSpec(
                name="point_mass_1d",
                state_dim=2,
                action_dim=1,
                action_low=np.array([-max_accel]),
                action_high=np.array([max_accel]),
                dt=dt,
                omega=omega,
                horizon_limit=horizon_limit,
                state_labels=("p", "v"),
                state_units=("m", "m/s"),
                action_labels=("a",),
                action_units=("m/s^2",),
                initial_state=initial_state,
            )
        )
        self.max_position = max_position
        self.max_speed = max_speed
        self.addon_gain = addon_gain

    def _extra_identity(self):
        return (self.max_position, self.max_speed, self.addon_gain)

    def _integrate(self, x, u):
        dt = self.spec.dt
        p = np.clip(x[..., 0] + x[..., 1] * dt, -self.max_position, self.max_position)
        v = np.clip(x[..., 1] + u[..., 0] * dt, -self.max_speed, self.max_speed)
        return np.stack([p, v], axis=-1)

    def _basic(self, x, u, x_next):
        p, v = x_next[..., 0], x_next[..., 1]
        return -(p**2 + v**2) - self.control_cost * u[..., 0] ** 2

    def _addon(self, x, u, x_next):
        return self.addon_gain * x_next[..., 1]
