"""Augmented-MDP equivalence: planning on ``omega' log pi_prior + r_R``
against solving the full task ``omega r + r_R`` directly."""

import logging
from dataclasses import dataclass

import numpy as np

from rmppi.errors import ConfigError
from rmppi.mdp import DiscreteMDP, TabularSolution
from rmppi.priors.soft_q import soft_q_iteration
from rmppi.priors.tabular import TabularSoftPolicy

logger = logging.getLogger(__name__)


@dataclass
class RqlReport:
    per_state_tv: np.ndarray
    omega: float
    omega_prime: float
    alpha: float
    horizon: int | None

    @property
    def max_tv(self) -> float:
        return float(np.max(self.per_state_tv))


def _stage_log_density(sol: TabularSolution, horizon: int | None) -> np.ndarray:
    if horizon is None:
        return sol.log_density(0)
    return np.stack([sol.log_density(t) for t in range(horizon)])


def _policy_tv(a: TabularSolution, b: TabularSolution) -> np.ndarray:
    """Per-state total variation, worst case over decision stages."""
    tv = np.zeros(a.q.shape[0])
    for t in range(a.n_stages):
        tv = np.maximum(tv, 0.5 * np.sum(np.abs(a.boltzmann(t) - b.boltzmann(t)), axis=-1))
    return tv


def check_rql_equivalence(
    mdp: DiscreteMDP,
    omega: float,
    r_addon,
    omega_prime: float,
    alpha: float,
    horizon: int | None = 4,
    gamma: float = 1.0,
) -> RqlReport:
    """Solve the full task and the augmented task, compare their Boltzmann policies.

    The prior is the soft-optimal policy for ``omega * r`` with entropy weight
    ``alpha``; the two policies coincide when ``omega_prime == alpha``.
    """
    if mdp.staged:
        raise ConfigError("The equivalence check needs a stationary basic reward")
    r_addon = np.asarray(r_addon, dtype=np.float64)
    if r_addon.shape != mdp.reward.shape:
        raise ConfigError(f"Add-on table shape {r_addon.shape} != reward {mdp.reward.shape}")

    prior = soft_q_iteration(mdp.with_reward(omega * mdp.reward), alpha, horizon, gamma)
    full = soft_q_iteration(mdp.with_reward(omega * mdp.reward + r_addon), alpha, horizon, gamma)
    augmented_reward = omega_prime * _stage_log_density(prior, horizon) + r_addon
    augmented = soft_q_iteration(mdp.with_reward(augmented_reward), alpha, horizon, gamma)
    report = RqlReport(_policy_tv(full, augmented), omega, omega_prime, alpha, horizon)
    logger.debug(
        "RQL check omega'=%g alpha=%g: max TV %.3e", omega_prime, alpha, report.max_tv
    )
    return report


def augmented_optimal_action(
    mdp_from_env: DiscreteMDP,
    prior_tab: TabularSoftPolicy,
    r_addon,
    omega_prime: float,
    alpha: float,
    x0,
    horizon: int | None = None,
    gamma: float = 0.95,
) -> tuple[int, np.ndarray]:
    """Soft-optimal first action of the augmented MDP at ``x0``'s grid cell.

    Returns the argmax action index (lowest index on ties) and the full
    Boltzmann row.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    if prior_tab.grid.outside(x0):
        raise ConfigError(f"Start state {x0} lies outside the prior's grid")
    if prior_tab.q_table.shape != (mdp_from_env.n_states, mdp_from_env.n_actions):
        raise ConfigError("Prior table does not match the discretized MDP")
    log_z = prior_tab.log_z(prior_tab.grid.centers())
    log_pi = prior_tab.q_table / prior_tab.alpha - log_z[:, None]
    reward = omega_prime * log_pi + np.asarray(r_addon, dtype=np.float64)
    if horizon is not None:
        reward = np.broadcast_to(reward, (horizon,) + reward.shape)
    sol = soft_q_iteration(mdp_from_env.with_reward(reward), alpha, horizon, gamma)
    row = sol.boltzmann(0)[prior_tab.grid.index(x0)]
    return int(np.argmax(row)), row
