"""Exhaustive action-sequence distributions over a deterministic MDP.

Two independent routes to the distribution of soft-optimal action sequences
from a start state: the closed form ``exp((sum r + V(x_T)) / alpha)``
normalised by enumeration, and the product of per-step Boltzmann
probabilities along each sequence's state trace. They must agree.
"""

import itertools
import logging

import numpy as np
from scipy.special import softmax

from rmppi.errors import ConfigError, ContractError, EnumerationLimitError
from rmppi.mdp import DiscreteMDP, TabularSolution

logger = logging.getLogger(__name__)

ENUMERATION_LIMIT = 1_000_000


def action_sequences(n_actions: int, horizon: int) -> np.ndarray:
    """All sequences in lexicographic order, shape ``(n_actions**horizon, horizon)``."""
    count = n_actions**horizon
    if count > ENUMERATION_LIMIT:
        raise EnumerationLimitError(count, ENUMERATION_LIMIT)
    return np.array(list(itertools.product(range(n_actions), repeat=horizon)), dtype=np.int64).reshape(
        count, horizon
    )


def _check(mdp: DiscreteMDP, sol: TabularSolution, x0: int, horizon: int):
    if horizon < 1:
        raise ContractError(f"Sequence horizon must be at least 1, got {horizon}")
    if not 0 <= x0 < mdp.n_states:
        raise ContractError(f"Start state {x0} outside 0..{mdp.n_states - 1}")
    if sol.gamma != 1.0:
        raise ConfigError("Sequence distributions are defined for undiscounted solutions")
    if sol.horizon is not None and horizon > sol.horizon:
        raise ContractError(f"Solution covers {sol.horizon} stages, {horizon} requested")


def sequence_distribution(
    mdp: DiscreteMDP, sol: TabularSolution, x0: int, horizon: int
) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form sequence distribution, normalised over the full enumeration.

    Returns ``(sequences, probabilities)``.
    """
    _check(mdp, sol, x0, horizon)
    seqs = action_sequences(mdp.n_actions, horizon)
    x = np.full(len(seqs), x0, dtype=np.int64)
    ret = np.zeros(len(seqs))
    for t in range(horizon):
        a = seqs[:, t]
        ret += mdp.reward_at(t)[x, a]
        x = mdp.transition[x, a]
    ret += sol.value_after(horizon)[x]
    return seqs, softmax(ret / sol.alpha)


def boltzmann_product(
    mdp: DiscreteMDP, sol: TabularSolution, x0: int, horizon: int
) -> tuple[np.ndarray, np.ndarray]:
    """Product of one-step Boltzmann probabilities along each sequence."""
    _check(mdp, sol, x0, horizon)
    seqs = action_sequences(mdp.n_actions, horizon)
    x = np.full(len(seqs), x0, dtype=np.int64)
    prob = np.ones(len(seqs))
    for t in range(horizon):
        a = seqs[:, t]
        prob *= sol.boltzmann(t)[x, a]
        x = mdp.transition[x, a]
    return seqs, prob


def total_variation(p, q) -> float:
    return 0.5 * float(np.sum(np.abs(np.asarray(p) - np.asarray(q))))


def factorization_gap(mdp: DiscreteMDP, sol: TabularSolution, horizon: int) -> float:
    """Largest total-variation gap between the two routes over every start state."""
    worst = 0.0
    for x0 in range(mdp.n_states):
        _, closed = sequence_distribution(mdp, sol, x0, horizon)
        _, product = boltzmann_product(mdp, sol, x0, horizon)
        worst = max(worst, total_variation(closed, product))
    return worst
