"""Learned residual dynamics ``x_next = x + denorm(net(norm(encode(x, u))))``."""

import logging
import struct
from dataclasses import dataclass

import numpy as np

from rmppi.envs.base import wrap_angle
from rmppi.errors import ContractError, NonFiniteError, WeightFileError
from rmppi.nn.adam import AdamState
from rmppi.nn.io import Reader, header, pack_array, read_bytes, read_mlp, write_bytes, mlp_serialize
from rmppi.nn.mlp import Mlp

logger = logging.getLogger(__name__)

MODEL_MAGIC = b"RMDY"
MODEL_VERSION = 1
STD_FLOOR = 1e-8


@dataclass(eq=False)
class Normalizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def identity(cls, dim: int) -> "Normalizer":
        return cls(np.zeros(dim), np.ones(dim))

    @classmethod
    def fit(cls, data) -> "Normalizer":
        data = np.asarray(data, dtype=np.float64)
        return cls(data.mean(axis=0), np.maximum(data.std(axis=0), STD_FLOOR))

    def apply(self, x):
        return (x - self.mean) / self.std

    def invert(self, z):
        return z * self.std + self.mean


class LearnedDynamics:
    """Residual MLP model of the state transition.

    Angle dimensions enter the network as ``(sin, cos)`` pairs and their
    predicted increments are wrapped back into ``[-pi, pi)``. Normalization
    statistics are fitted once, on the first training set, and stay frozen
    through later fine-tuning.
    """

    def __init__(
        self,
        net: Mlp,
        state_dim: int,
        action_dim: int,
        angle_dims: tuple[int, ...] = (),
        input_norm: Normalizer | None = None,
        target_norm: Normalizer | None = None,
    ):
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.angle_dims = tuple(int(d) for d in angle_dims)
        if any(not 0 <= d < state_dim for d in self.angle_dims):
            raise ContractError(f"Angle dimensions {self.angle_dims} out of range")
        self._angle_mask = np.zeros(state_dim, dtype=bool)
        self._angle_mask[list(self.angle_dims)] = True
        if net.input_dim != self.feature_dim or net.output_dim != state_dim:
            raise ContractError(
                f"Network maps {net.input_dim} -> {net.output_dim}, "
                f"expected {self.feature_dim} -> {state_dim}"
            )
        self.net = net
        self.input_norm = input_norm or Normalizer.identity(self.feature_dim)
        self.target_norm = target_norm or Normalizer.identity(state_dim)
        self.normalization_frozen = input_norm is not None
        self.optimizer: AdamState | None = None

    @classmethod
    def create(
        cls,
        state_dim: int,
        action_dim: int,
        angle_dims=(),
        hidden=(64, 64),
        activation: str = "mish",
        rng: np.random.Generator | None = None,
    ) -> "LearnedDynamics":
        feature_dim = state_dim + len(tuple(angle_dims)) + action_dim
        net = Mlp.init((feature_dim, *hidden, state_dim), activation, rng)
        return cls(net, state_dim, action_dim, angle_dims)

    @property
    def feature_dim(self) -> int:
        return self.state_dim + len(self.angle_dims) + self.action_dim

    def encode(self, x, u):
        """State features ``[plain dims, sin, cos of angle dims]`` followed by the action."""
        angles = x[..., self._angle_mask]
        return np.concatenate(
            [x[..., ~self._angle_mask], np.sin(angles), np.cos(angles), u], axis=-1
        )

    def _encode_backward(self, x, feature_grad):
        """Gradient of the state features with respect to ``x``."""
        n_plain = self.state_dim - len(self.angle_dims)
        n_angle = len(self.angle_dims)
        grad = np.zeros(x.shape)
        grad[..., ~self._angle_mask] = feature_grad[..., :n_plain]
        angles = x[..., self._angle_mask]
        g_sin = feature_grad[..., n_plain : n_plain + n_angle]
        g_cos = feature_grad[..., n_plain + n_angle : n_plain + 2 * n_angle]
        grad[..., self._angle_mask] = g_sin * np.cos(angles) - g_cos * np.sin(angles)
        return grad

    def fit_normalization(self, x, u, delta):
        if self.normalization_frozen:
            logger.debug("Normalization already frozen, keeping it")
            return
        self.input_norm = Normalizer.fit(self.encode(x, u))
        self.target_norm = Normalizer.fit(delta)
        self.normalization_frozen = True

    def _advance(self, x, delta):
        x_next = x + delta
        if self.angle_dims:
            x_next[..., self._angle_mask] = wrap_angle(x_next[..., self._angle_mask])
        return x_next

    def predict_batch(self, x, u):
        """Unvalidated prediction, used inside planner rollouts."""
        z = self.net.forward(self.input_norm.apply(self.encode(x, u)))
        return self._advance(x, self.target_norm.invert(z))

    def predict(self, x, u):
        x = np.asarray(x, dtype=np.float64)
        u = np.asarray(u, dtype=np.float64)
        if x.shape[-1:] != (self.state_dim,) or u.shape[-1:] != (self.action_dim,):
            raise ContractError(
                f"predict expects state dim {self.state_dim} and action dim "
                f"{self.action_dim}, got {x.shape} and {u.shape}"
            )
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(u))):
            raise NonFiniteError("Non-finite input to learned dynamics")
        x_next = self.predict_batch(x, u)
        if not np.all(np.isfinite(x_next)):
            raise NonFiniteError("Learned dynamics produced a non-finite state")
        return x_next

    def _state_error(self, target, predicted):
        err = target - predicted
        if self.angle_dims:
            err[..., self._angle_mask] = wrap_angle(err[..., self._angle_mask])
        return err

    def multi_step_loss_and_grad(self, states, actions, gamma: float):
        """Mean discounted multi-step error over a batch of windows and its gradient.

        ``states`` is ``(n, T + 1, state_dim)`` and ``actions`` ``(n, T, action_dim)``.
        Predictions start from ``states[:, 0]`` and feed back on themselves, so
        gradients are propagated through the whole recursion.
        """
        n, horizon = actions.shape[0], actions.shape[1]
        s_hat = states[:, 0].copy()
        trace, caches = [s_hat], []
        loss = 0.0
        errors = []
        for t in range(horizon):
            z, cache = self.net.forward_cached(
                self.input_norm.apply(self.encode(s_hat, actions[:, t]))
            )
            s_hat = self._advance(s_hat, self.target_norm.invert(z))
            caches.append(cache)
            trace.append(s_hat)
            err = self._state_error(states[:, t + 1], s_hat)
            errors.append(err)
            loss += gamma ** (t + 1) * float(np.sum(err * err))

        grads = [np.zeros_like(p) for p in self.net.params()]
        g_state = np.zeros((n, self.state_dim))
        for t in reversed(range(horizon)):
            # d/d s_hat[t+1] of its own error term, plus what flows back from later steps
            g_state = g_state - 2.0 * gamma ** (t + 1) * errors[t]
            g_z = g_state * self.target_norm.std
            layer_grads, g_in = self.net.backward(caches[t], g_z)
            for i, g in enumerate(layer_grads):
                grads[i] += g
            g_features = g_in / self.input_norm.std
            n_state_features = self.state_dim + len(self.angle_dims)
            g_state = g_state + self._encode_backward(
                trace[t], g_features[..., :n_state_features]
            )
        return loss / n, [g / n for g in grads]


def multi_step_loss(dyn, states, actions, gamma: float) -> float:
    """Mean over windows of ``sum_t gamma**t * |s_t - s_hat_t|**2``.

    ``dyn`` is anything with ``predict_batch(x, u)`` or a plain callable.
    """
    states = np.asarray(states, dtype=np.float64)
    actions = np.asarray(actions, dtype=np.float64)
    if states.ndim == 2:
        states, actions = states[None], actions[None]
    if actions.shape[1] < 1 or states.shape[1] != actions.shape[1] + 1:
        raise ContractError("A window needs T >= 1 actions and T + 1 states")
    step = dyn.predict_batch if hasattr(dyn, "predict_batch") else dyn
    angle_dims = getattr(dyn, "angle_dims", ())
    s_hat = states[:, 0]
    total = np.zeros(len(states))
    for t in range(actions.shape[1]):
        s_hat = step(s_hat, actions[:, t])
        err = states[:, t + 1] - s_hat
        for d in angle_dims:
            err[:, d] = wrap_angle(err[:, d])
        total += gamma ** (t + 1) * np.sum(err * err, axis=-1)
    return float(total.mean())


def dynamics_serialize(dyn: LearnedDynamics) -> bytes:
    return b"".join(
        [
            header(MODEL_MAGIC, MODEL_VERSION),
            struct.pack("<II", dyn.state_dim, dyn.action_dim),
            struct.pack("<B", len(dyn.angle_dims)),
            struct.pack(f"<{len(dyn.angle_dims)}I", *dyn.angle_dims),
            struct.pack("<B", int(dyn.normalization_frozen)),
            pack_array(dyn.input_norm.mean),
            pack_array(dyn.input_norm.std),
            pack_array(dyn.target_norm.mean),
            pack_array(dyn.target_norm.std),
            mlp_serialize(dyn.net),
        ]
    )


def dynamics_deserialize(data: bytes) -> LearnedDynamics:
    reader = Reader(data)
    reader.expect_header(MODEL_MAGIC, MODEL_VERSION)
    state_dim, action_dim = reader.unpack("<II")
    (n_angle,) = reader.unpack("<B")
    angle_dims = reader.unpack(f"<{n_angle}I")
    (frozen,) = reader.unpack("<B")
    norms = [reader.array() for _ in range(4)]
    net = read_mlp(reader)
    if not reader.exhausted:
        raise WeightFileError("Trailing bytes after dynamics model")
    try:
        dyn = LearnedDynamics(
            net,
            state_dim,
            action_dim,
            angle_dims,
            Normalizer(norms[0], norms[1]),
            Normalizer(norms[2], norms[3]),
        )
    except ContractError as e:
        raise WeightFileError(f"Inconsistent dynamics model: {e}") from e
    dyn.normalization_frozen = bool(frozen)
    return dyn


def save_dynamics(dyn: LearnedDynamics, path):
    write_bytes(path, dynamics_serialize(dyn))


def load_dynamics(path) -> LearnedDynamics:
    return dynamics_deserialize(read_bytes(path))
