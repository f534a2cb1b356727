"""Sampling-based planning around a prior policy.

Every candidate sequence is the nominal plus a Gaussian perturbation. The
nominal comes from an open-loop rollout of the prior's mode, or is zero
for the ``full`` variant. Candidates are scored on the planning dynamics,
weighted by a shifted softmax over the elite fraction, and averaged into
the update of the nominal.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Protocol

import numpy as np

from rmppi.envs.base import Env
from rmppi.errors import ConfigError, NonFiniteError
from rmppi.planner.config import PlannerConfig, Variant

logger = logging.getLogger(__name__)


class Dynamics(Protocol):
    def predict_batch(self, x, u): ...


class TrueDynamics:
    """The environment's own transition function behind the ``Dynamics`` protocol."""

    def __init__(self, env: Env):
        self.env = env

    def predict_batch(self, x, u):
        return self.env.step_batch(x, u)


@dataclass
class ScoredRollout:
    score: float
    states: np.ndarray

    @property
    def valid(self) -> bool:
        return math.isfinite(self.score)


@dataclass
class ScoredRollouts:
    scores: np.ndarray
    states: np.ndarray

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.scores)


@dataclass
class WeightVector:
    weights: np.ndarray
    eta: float
    beta: float
    n_invalid: int
    degraded: bool

    @property
    def effective_sample_size(self) -> float:
        total = float(np.sum(self.weights**2))
        return 1.0 / total if total > 0 else 0.0


@dataclass
class PlanDiagnostics:
    step: int
    variant: str
    beta: float
    eta: float
    effective_sample_size: float
    n_invalid: int
    degraded: bool


def init_nominal(prior, dyn: Dynamics, x0, horizon: int, clamp: Callable | None = None) -> np.ndarray:
    """Open-loop rollout of the prior's mode under the planning dynamics."""
    x = np.asarray(x0, dtype=np.float64)
    actions = []
    for t in range(horizon):
        if not np.all(np.isfinite(x)):
            raise NonFiniteError(f"Nominal rollout reached a non-finite state at step {t}", index=t)
        u = np.asarray(prior.mode(x), dtype=np.float64)
        actions.append(u)
        x = dyn.predict_batch(x, clamp(u) if clamp else u)
    return np.stack(actions)


def sample_noise(config: PlannerConfig, rng: np.random.Generator, action_dim: int | None = None) -> np.ndarray:
    """The whole ``(samples, horizon, action_dim)`` block in one draw."""
    action_dim = action_dim or len(config.sigma)
    sigma = config.sigma_for(action_dim)
    return rng.standard_normal((config.samples, config.horizon, action_dim)) * sigma


def score_rollouts(
    variant: Variant,
    prior,
    dyn: Dynamics,
    env: Env,
    x0,
    nominal: np.ndarray,
    noise: np.ndarray,
    config: PlannerConfig,
    terminal_estimator: Callable | None = None,
) -> ScoredRollouts:
    """Score a batch of perturbations of ``nominal``.

    Per step the accumulated score gains ``gamma**t * reward`` and loses the
    undiscounted coupling ``temperature * nominal_t . Sigma^-1 eps_t``. The
    per-step reward depends on the variant:

    - residual: ``r_R + omega' * log pi(u + eps | x)``
    - greedy: ``r_R``
    - full, guided, valued: ``omega * r + r_R``

    Actions are clamped before the dynamics and the rewards, while the
    prior's density is taken at the unclamped action. Rollouts that go
    non-finite get a NaN score and are dropped by ``compute_weights``.
    """
    variant = Variant.parse(variant)
    noise = np.asarray(noise, dtype=np.float64)
    if noise.ndim == 2:
        noise = noise[None]
    k, horizon, m = noise.shape
    if nominal.shape != (horizon, m):
        raise ConfigError(f"Nominal has shape {nominal.shape}, noise rows are {(horizon, m)}")
    if variant in (Variant.RESIDUAL, Variant.GREEDY, Variant.GUIDED, Variant.VALUED, Variant.PRIOR) and prior is None:
        raise ConfigError(f"The {variant.value} variant needs a prior")
    if variant is Variant.VALUED and terminal_estimator is None:
        raise ConfigError("The valued variant needs a terminal estimator")
    omega = env.spec.omega if config.omega is None else config.omega
    inv_var = 1.0 / config.sigma_for(m) ** 2
    x0 = np.asarray(x0, dtype=np.float64)

    states = np.empty((k, horizon + 1, x0.shape[-1]))
    states[:, 0] = x0
    scores = np.zeros(k)
    alive = np.ones(k, dtype=bool)
    with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
        for t in range(horizon):
            # dead rows are evaluated at x0 so priors never see NaN states
            x = np.where(alive[:, None], states[:, t], x0)
            u_raw = nominal[t] + noise[:, t]
            u = env.clamp(u_raw)
            x_next = dyn.predict_batch(x, u)
            basic, addon = env.rewards_for(x, u, x_next)
            if variant is Variant.RESIDUAL:
                reward = addon + config.omega_prime * prior.log_prob(x, u_raw)
            elif variant is Variant.GREEDY:
                reward = addon
            else:
                reward = omega * basic + addon
            coupling = config.temperature * (noise[:, t] * inv_var) @ nominal[t]
            scores += config.gamma**t * reward - coupling
            states[:, t + 1] = x_next
            alive &= np.all(np.isfinite(x_next), axis=-1) & np.isfinite(scores)
        if variant is Variant.VALUED:
            x_last = np.where(alive[:, None], states[:, -1], x0)
            scores += config.gamma**horizon * np.asarray(terminal_estimator(x_last))
    scores[~(alive & np.isfinite(scores))] = np.nan
    return ScoredRollouts(scores, states)


def score_rollout(
    variant, prior, dyn, env, x0, nominal, noise, config, terminal_estimator=None
) -> ScoredRollout:
    """Score of one perturbation and its predicted state trace."""
    scored = score_rollouts(variant, prior, dyn, env, x0, nominal, noise, config, terminal_estimator)
    return ScoredRollout(float(scored.scores[0]), scored.states[0])


def compute_weights(scores, temperature: float, top_ratio: float = 1.0) -> WeightVector:
    """Shifted softmax over the highest-scoring candidates.

    The ``ceil(top_ratio * K)`` best finite scores are kept (ties broken by
    index) and the rest get zero weight. The shift is the best retained
    score. When no score is finite the result is all zeros and flagged
    degraded.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if not temperature > 0:
        raise ConfigError(f"temperature must be positive, got {temperature}")
    if not 0 < top_ratio <= 1:
        raise ConfigError(f"top_ratio must lie in (0, 1], got {top_ratio}")
    k = len(scores)
    valid = np.isfinite(scores)
    n_valid = int(valid.sum())
    weights = np.zeros(k)
    if n_valid == 0:
        return WeightVector(weights, 0.0, float("nan"), k, True)
    n_keep = min(math.ceil(round(top_ratio * k, 9)), n_valid)
    ranked = np.argsort(-np.where(valid, scores, -np.inf), kind="stable")
    kept = ranked[:n_keep]
    beta = float(scores[kept[0]])
    e = np.exp((scores[kept] - beta) / temperature)
    eta = float(e.sum())
    weights[kept] = e / eta
    return WeightVector(weights, eta, beta, k - n_valid, False)


def update_sequence(nominal: np.ndarray, noises: np.ndarray, weights) -> np.ndarray:
    """``nominal_t + sum_k w_k eps_t^k`` for every step."""
    return nominal + np.einsum("k,ktm->tm", np.asarray(weights, dtype=np.float64), noises)


class Planner:
    """Receding-horizon planner for one environment.

    ``dynamics`` defaults to the environment's own transition function. The
    noise generator is seeded from ``config.seed`` once, so a sequence of
    ``plan`` calls is reproducible as a whole.
    """

    def __init__(
        self,
        config: PlannerConfig,
        env: Env,
        prior=None,
        dynamics: Dynamics | None = None,
        terminal_estimator: Callable | None = None,
        rng: np.random.Generator | None = None,
    ):
        self.config = config
        self.env = env
        self.prior = prior
        self.dynamics = dynamics if dynamics is not None else TrueDynamics(env)
        self.terminal_estimator = terminal_estimator
        self.rng = rng if rng is not None else np.random.default_rng(config.seed)
        self.sigma = config.sigma_for(env.spec.action_dim)
        self.steps = 0
        self.degraded_steps = 0
        self.last: PlanDiagnostics | None = None
        if config.variant is not Variant.FULL and prior is None:
            raise ConfigError(f"The {config.variant.value} variant needs a prior")
        if prior is not None and prior.action_dim != env.spec.action_dim:
            raise ConfigError(
                f"Prior acts in {prior.action_dim} dimensions, env '{env.spec.name}' "
                f"in {env.spec.action_dim}"
            )
        if config.variant is Variant.VALUED and terminal_estimator is None:
            raise ConfigError("The valued variant needs a terminal estimator")

    def nominal(self, x0) -> np.ndarray:
        if self.config.variant is Variant.FULL:
            return np.zeros((self.config.horizon, self.env.spec.action_dim))
        return init_nominal(self.prior, self.dynamics, x0, self.config.horizon, self.env.clamp)

    def plan(self, x0) -> np.ndarray:
        """Updated action sequence from ``x0``; a controller executes row 0."""
        cfg = self.config
        nominal = self.nominal(x0)
        step = self.steps
        self.steps += 1
        if cfg.variant is Variant.PRIOR:
            self.last = None
            return nominal

        noise = sample_noise(cfg, self.rng, self.env.spec.action_dim)
        if cfg.include_nominal:
            noise = np.concatenate([noise, np.zeros((1,) + noise.shape[1:])])
        scored = score_rollouts(
            cfg.variant, self.prior, self.dynamics, self.env, x0, nominal, noise, cfg, self.terminal_estimator
        )
        w = compute_weights(scored.scores, cfg.temperature, cfg.top_ratio)
        self.last = PlanDiagnostics(
            step, cfg.variant.value, w.beta, w.eta, w.effective_sample_size, w.n_invalid, w.degraded
        )
        if w.degraded:
            self.degraded_steps += 1
            logger.warning(
                "Planning step %d: all %d rollouts invalid, keeping the nominal sequence "
                "(%d degraded steps so far)",
                step,
                len(scored.scores),
                self.degraded_steps,
            )
            return nominal
        if w.n_invalid:
            logger.debug("Planning step %d: %d invalid rollouts dropped", step, w.n_invalid)
        return update_sequence(nominal, noise, w.weights)
