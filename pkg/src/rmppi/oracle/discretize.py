import logging
from dataclasses import dataclass, replace

import numpy as np
from cachetools import LRUCache, cached
from cachetools.keys import hashkey

from rmppi.envs.base import Env
from rmppi.errors import ConfigError
from rmppi.mdp import ActionGrid, DiscreteMDP, StateGrid

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class GridSpec:
    states: StateGrid
    actions: ActionGrid

    def key(self) -> tuple:
        return (
            tuple(self.states.low),
            tuple(self.states.high),
            self.states.bins,
            tuple(tuple(v) for v in self.actions.values),
        )


def _discretize_key(env: Env, grid: GridSpec):
    return hashkey(env.identity(), grid.key())


def discretize_env(env: Env, grid: GridSpec) -> DiscreteMDP:
    """Tabular MDP over grid cell centers.

    Each (cell center, action) pair is stepped through the environment and
    the successor snapped to its nearest cell. Basic rewards populate
    ``reward`` and add-on rewards populate ``addon``, both at cell centers.

    Tables are cached per (env, grid) and shared between calls, so they come
    back read-only inside a fresh ``DiscreteMDP``.
    """
    return replace(_discretize(env, grid))


@cached(cache=LRUCache(maxsize=16), key=_discretize_key)
def _discretize(env: Env, grid: GridSpec) -> DiscreteMDP:
    if grid.states.dim != env.spec.state_dim:
        raise ConfigError(
            f"Grid has {grid.states.dim} dimensions, env '{env.spec.name}' "
            f"has {env.spec.state_dim}"
        )
    if grid.actions.dim != env.spec.action_dim:
        raise ConfigError(
            f"Action grid has {grid.actions.dim} dimensions, env '{env.spec.name}' "
            f"has {env.spec.action_dim}"
        )
    centers = grid.states.centers()
    actions = grid.actions.actions()
    x = np.repeat(centers[:, None, :], len(actions), axis=1)
    u = np.broadcast_to(actions, x.shape[:2] + (actions.shape[1],))
    basic, addon, x_next = env.rewards_batch(x, u)

    escaping = grid.states.outside(x_next)
    if np.any(escaping):
        cells = sorted(set(np.nonzero(escaping)[0].tolist()))
        shown = ", ".join(str(c) for c in cells[:10])
        more = f" and {len(cells) - 10} more" if len(cells) > 10 else ""
        raise ConfigError(
            f"Grid too coarse for '{env.spec.name}': dynamics leave the box "
            f"from cells {shown}{more}"
        )
    transition = grid.states.index(x_next)
    logger.debug(
        "Discretized %s into %d states x %d actions",
        env.spec.name,
        grid.states.n_cells,
        grid.actions.n_actions,
    )
    mdp = DiscreteMDP(transition, basic, grid.actions.cell_volume, addon)
    for table in (mdp.transition, mdp.reward, mdp.addon):
        table.setflags(write=False)
    return mdp
