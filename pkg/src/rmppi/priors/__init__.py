"""Maximum-entropy prior policies.

Every policy exposes ``mode(x)``, ``log_prob(x, u)`` and ``sample(x, rng)``
over single states or batches with the state dimension last.
"""

from typing import Protocol

import numpy as np

from rmppi.priors.gaussian import (
    GaussianPolicy,
    LinearFeedback,
    MeanFunction,
    MlpMean,
    TabularInterpolatedMean,
    TrackFollower,
    tabular_to_continuous,
)
from rmppi.priors.soft_q import soft_bellman_residual, soft_q_iteration
from rmppi.priors.tabular import TabularSoftPolicy, load_tabular, save_tabular


class PriorPolicy(Protocol):
    action_dim: int

    def mode(self, x): ...

    def log_prob(self, x, u): ...

    def sample(self, x, rng: np.random.Generator): ...


def policy_mode(policy: PriorPolicy, x):
    return policy.mode(x)


def policy_log_prob(policy: PriorPolicy, x, u):
    return policy.log_prob(x, u)


def policy_sample(policy: PriorPolicy, x, rng: np.random.Generator):
    return policy.sample(x, rng)


__all__ = [
    "GaussianPolicy",
    "LinearFeedback",
    "MeanFunction",
    "MlpMean",
    "PriorPolicy",
    "TabularInterpolatedMean",
    "TabularSoftPolicy",
    "TrackFollower",
    "load_tabular",
    "policy_log_prob",
    "policy_mode",
    "policy_sample",
    "save_tabular",
    "soft_bellman_residual",
    "soft_q_iteration",
    "tabular_to_continuous",
]
