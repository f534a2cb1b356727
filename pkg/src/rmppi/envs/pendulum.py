import numpy as np

from rmppi.envs.base import Env, EnvSpec, wrap_angle


class Pendulum(Env):
    """Frictionless torque-driven pendulum, ``theta = 0`` is upright.

    State ``(theta, theta_dot)``, action ``(torque,)``. The basic reward
    regulates the pendulum upright, the add-on reward penalises angular speed.
    """

    def __init__(
        self,
        dt: float = 0.05,
        omega: float = 1.0,
        horizon_limit: int = 200,
        max_torque: float = 2.0,
        max_speed: float = 8.0,
        gravity: float = 9.81,
        mass: float = 1.0,
        length: float = 1.0,
        initial_state=None,
    ):
        super().__init__(
            EnvSpec(
                name="pendulum",
                state_dim=2,
                action_dim=1,
                action_low=np.array([-max_torque]),
                action_high=np.array([max_torque]),
                dt=dt,
                omega=omega,
                horizon_limit=horizon_limit,
                angle_dims=(0,),
                state_labels=("theta", "theta_dot"),
                state_units=("rad", "rad/s"),
                action_labels=("torque",),
                action_units=("N*m",),
                initial_state=initial_state,
            )
        )
        self.max_speed = max_speed
        self.gravity = gravity
        self.mass = mass
        self.length = length

    def _extra_identity(self):
        return (self.max_speed, self.gravity, self.mass, self.length)

    def _integrate(self, x, u):
        dt = self.spec.dt
        theta, theta_dot = x[..., 0], x[..., 1]
        theta_ddot = (self.gravity / self.length) * np.sin(theta) + u[..., 0] / (
            self.mass * self.length**2
        )
        new_theta = wrap_angle(theta + theta_dot * dt)
        new_theta_dot = np.clip(
            theta_dot + theta_ddot * dt, -self.max_speed, self.max_speed
        )
        return np.stack([new_theta, new_theta_dot], axis=-1)

    def _basic(self, x, u, x_next):
        theta, theta_dot = x[..., 0], x[..., 1]
        return -(theta**2 + 0.1 * theta_dot**2 + 0.001 * u[..., 0] ** 2)

    def _addon(self, x, u, x_next):
        return -np.abs(x[..., 1])
