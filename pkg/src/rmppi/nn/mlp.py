import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from rmppi.errors import ConfigError, ContractError

logger = logging.getLogger(__name__)


class Activation(ABC):
    name: str
    code: int

    @abstractmethod
    def eval(self, z): ...

    @abstractmethod
    def derivative(self, z): ...


class Mish(Activation):
    name = "mish"
    code = 1

    def eval(self, z):
        return z * np.tanh(np.logaddexp(0.0, z))

    def derivative(self, z):
        tsp = np.tanh(np.logaddexp(0.0, z))
        return tsp + z * (1.0 - tsp**2) * expit(z)


class Relu(Activation):
    name = "relu"
    code = 2

    def eval(self, z):
        return np.maximum(z, 0.0)

    def derivative(self, z):
        return np.where(z > 0, 1.0, 0.0)


class Tanh(Activation):
    name = "tanh"
    code = 3

    def eval(self, z):
        return np.tanh(z)

    def derivative(self, z):
        return 1.0 - np.tanh(z) ** 2


ACTIVATIONS: dict[str, Activation] = {a.name: a for a in (Mish(), Relu(), Tanh())}
ACTIVATIONS_BY_CODE: dict[int, Activation] = {a.code: a for a in ACTIVATIONS.values()}


@dataclass(eq=False)
class Mlp:
    """Feedforward network, activation on hidden layers and a linear output.

    Weights are stored ``(fan_out, fan_in)`` so a batch ``X`` of shape
    ``(n, fan_in)`` maps to ``X @ W.T + b``.
    """

    layer_dims: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str = "mish"
    _act: Activation = field(init=False, repr=False)

    def __post_init__(self):
        self.layer_dims = tuple(int(d) for d in self.layer_dims)
        if len(self.layer_dims) < 2 or min(self.layer_dims) < 1:
            raise ConfigError(f"Invalid layer dims {self.layer_dims}")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(
                f"Unknown activation '{self.activation}', "
                f"expected one of {sorted(ACTIVATIONS)}"
            )
        self._act = ACTIVATIONS[self.activation]
        n = len(self.layer_dims) - 1
        if len(self.weights) != n or len(self.biases) != n:
            raise ContractError(f"Expected {n} weight matrices and bias vectors")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            shape = (self.layer_dims[i + 1], self.layer_dims[i])
            if w.shape != shape or b.shape != (shape[0],):
                raise ContractError(
                    f"Layer {i}: got W{w.shape} b{b.shape}, expected W{shape}"
                )

    @classmethod
    def init(
        cls,
        layer_dims,
        activation: str = "mish",
        rng: np.random.Generator | None = None,
    ) -> "Mlp":
        """Uniform initialisation in +-sqrt(6 / (fan_in + fan_out)), zero biases."""
        rng = rng if rng is not None else np.random.default_rng(0)
        weights, biases = [], []
        for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
            biases.append(np.zeros(fan_out))
        return cls(tuple(layer_dims), weights, biases, activation)

    @classmethod
    def zeros(cls, layer_dims, activation: str = "mish") -> "Mlp":
        weights = [np.zeros((o, i)) for i, o in zip(layer_dims[:-1], layer_dims[1:])]
        biases = [np.zeros(o) for o in layer_dims[1:]]
        return cls(tuple(layer_dims), weights, biases, activation)

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def output_dim(self) -> int:
        return self.layer_dims[-1]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def params(self) -> list[np.ndarray]:
        """Parameters interleaved as ``[W0, b0, W1, b1, ...]``."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def set_params(self, params: list[np.ndarray]):
        self.weights = [np.asarray(p, dtype=np.float64) for p in params[0::2]]
        self.biases = [np.asarray(p, dtype=np.float64) for p in params[1::2]]

    def copy(self) -> "Mlp":
        return Mlp(
            self.layer_dims,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.activation,
        )

    def _check_input(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1:] != (self.input_dim,):
            raise ContractError(
                f"Network expects inputs of dimension {self.input_dim}, got {x.shape}"
            )
        return x

    def forward(self, x):
        x = self._check_input(x)
        a = x
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w.T + b
            a = self._act.eval(z) if i < self.n_layers - 1 else z
        return a

    def forward_cached(self, x):
        """Forward pass that also returns ``(input, pre-activation)`` per layer."""
        x = self._check_input(x)
        cache = []
        a = x
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w.T + b
            cache.append((a, z))
            a = self._act.eval(z) if i < self.n_layers - 1 else z
        return a, cache

    def backward(self, cache, output_grad):
        """Reverse-mode pass through a cached forward.

        Gradients are summed over any leading batch dimensions. Returns
        ``(param_grads, input_grad)`` with ``param_grads`` in ``params()`` order.
        """
        delta = np.asarray(output_grad, dtype=np.float64)
        if delta.shape != cache[-1][1].shape:
            raise ContractError(
                f"Output gradient has shape {delta.shape}, "
                f"expected {cache[-1][1].shape}"
            )
        grads = [None] * (2 * self.n_layers)
        for i in reversed(range(self.n_layers)):
            a_prev, z = cache[i]
            if i < self.n_layers - 1:
                delta = delta * self._act.derivative(z)
            d2 = delta.reshape(-1, delta.shape[-1])
            a2 = a_prev.reshape(-1, a_prev.shape[-1])
            grads[2 * i] = d2.T @ a2
            grads[2 * i + 1] = d2.sum(axis=0)
            delta = delta @ self.weights[i]
        return grads, delta


def mlp_forward(net: Mlp, x):
    return net.forward(x)


def mlp_backward(net: Mlp, x, output_grad):
    _, cache = net.forward_cached(x)
    return net.backward(cache, output_grad)
