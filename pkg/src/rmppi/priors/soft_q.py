import logging

import numpy as np
from scipy.special import logsumexp

from rmppi.errors import ConfigError, SoftQConvergenceError
from rmppi.mdp import DiscreteMDP, TabularSolution

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-10
DEFAULT_MAX_ITERATIONS = 100_000


def _soft_value(q, alpha: float, log_volume: float):
    # cell-volume weighted quadrature of the integral of exp(Q / alpha) over actions
    log_z = logsumexp(q / alpha, axis=-1) + log_volume
    return alpha * log_z, log_z


def soft_q_iteration(
    mdp: DiscreteMDP,
    alpha: float,
    horizon: int | None = None,
    gamma: float = 1.0,
    tol: float = DEFAULT_TOLERANCE,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> TabularSolution:
    """Soft Bellman backup ``Q = r + gamma * alpha * log sum exp(Q'/alpha) * vol``.

    With a finite ``horizon`` the backup is exact and the solution holds one Q
    table per decision stage (terminal value zero). With ``horizon=None`` the
    stationary fixed point is iterated to a sup-norm change of ``tol``, which
    needs ``gamma < 1``.
    """
    if not alpha > 0:
        raise ConfigError(f"alpha must be positive, got {alpha}")
    if not 0 < gamma <= 1:
        raise ConfigError(f"gamma must lie in (0, 1], got {gamma}")
    log_volume = float(np.log(mdp.action_cell_volume))
    nxt = mdp.transition

    if horizon is not None:
        if horizon < 1:
            raise ConfigError(f"horizon must be at least 1, got {horizon}")
        if mdp.staged and mdp.reward.shape[0] < horizon:
            raise ConfigError(
                f"Staged reward covers {mdp.reward.shape[0]} stages, "
                f"horizon {horizon} requested"
            )
        q_stages = np.empty((horizon, mdp.n_states, mdp.n_actions))
        v_stages = np.zeros((horizon + 1, mdp.n_states))
        log_z_stages = np.empty((horizon, mdp.n_states))
        for t in reversed(range(horizon)):
            q_stages[t] = mdp.reward_at(t) + gamma * v_stages[t + 1][nxt]
            v_stages[t], log_z_stages[t] = _soft_value(q_stages[t], alpha, log_volume)
        return TabularSolution(
            q_stages, v_stages, log_z_stages, alpha, gamma, mdp.action_cell_volume, horizon
        )

    if mdp.staged:
        raise ConfigError("Stage-indexed rewards need a finite horizon")
    if not gamma < 1:
        raise ConfigError("Infinite-horizon soft Q iteration needs gamma < 1")
    q = np.zeros((mdp.n_states, mdp.n_actions))
    residual = np.inf
    for iteration in range(1, max_iterations + 1):
        v, _ = _soft_value(q, alpha, log_volume)
        q_new = mdp.reward + gamma * v[nxt]
        residual = float(np.max(np.abs(q_new - q)))
        q = q_new
        if residual <= tol:
            logger.debug("Soft Q iteration converged in %d iterations", iteration)
            break
    else:
        raise SoftQConvergenceError(residual, max_iterations)
    v, log_z = _soft_value(q, alpha, log_volume)
    return TabularSolution(
        q[None], v[None], log_z[None], alpha, gamma, mdp.action_cell_volume, None
    )


def soft_bellman_residual(mdp: DiscreteMDP, sol: TabularSolution) -> float:
    """Largest violation of the soft Bellman equation over every stage."""
    worst = 0.0
    for t in range(sol.n_stages):
        v_next = sol.value_after(t + 1)
        target = mdp.reward_at(t) + sol.gamma * v_next[mdp.transition]
        worst = max(worst, float(np.max(np.abs(sol.q_stages[t] - target))))
    return worst
