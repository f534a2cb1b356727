import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp, softmax

from rmppi.errors import ConfigError, ContractError
from rmppi.mdp import ActionGrid, StateGrid, TabularSolution
from rmppi.nn.io import Reader, header, pack_array, read_bytes, write_bytes

logger = logging.getLogger(__name__)

TABULAR_MAGIC = b"RMTB"
TABULAR_VERSION = 1


class GridClampCounter:
    """Counts queries that fell outside a grid and had to be clamped."""

    def __init__(self, owner: str):
        self.owner = owner
        self.count = 0

    def observe(self, grid: StateGrid, x):
        n = int(np.count_nonzero(grid.outside(x)))
        if n:
            self.count += n
            logger.warning(
                "%s: %d state(s) outside the grid clamped to its boundary (%d so far)",
                self.owner,
                n,
                self.count,
            )


@dataclass(eq=False)
class TabularSoftPolicy:
    """Boltzmann policy ``exp(Q / alpha) / Z`` over a state grid and action grid."""

    grid: StateGrid
    action_grid: ActionGrid
    q_table: np.ndarray
    alpha: float
    clamps: GridClampCounter = field(default=None, repr=False)

    def __post_init__(self):
        self.q_table = np.asarray(self.q_table, dtype=np.float64)
        if self.q_table.shape != (self.grid.n_cells, self.action_grid.n_actions):
            raise ConfigError(
                f"Q table shape {self.q_table.shape} does not match grid "
                f"({self.grid.n_cells}, {self.action_grid.n_actions})"
            )
        if not self.alpha > 0:
            raise ConfigError(f"alpha must be positive, got {self.alpha}")
        if self.clamps is None:
            self.clamps = GridClampCounter("tabular policy")

    @classmethod
    def from_solution(
        cls, grid: StateGrid, action_grid: ActionGrid, sol: TabularSolution, stage: int = 0
    ) -> "TabularSoftPolicy":
        return cls(grid, action_grid, sol.q_stages[sol.stage(stage)], sol.alpha)

    @property
    def action_dim(self) -> int:
        return self.action_grid.dim

    @property
    def log_cell_volume(self) -> float:
        return float(np.log(self.action_grid.cell_volume))

    def cell(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1:] != (self.grid.dim,):
            raise ContractError(f"State dimension {x.shape} does not match grid {self.grid.dim}")
        self.clamps.observe(self.grid, x)
        return self.grid.index(x)

    def probabilities(self, x) -> np.ndarray:
        """Probability mass per action cell at the state's grid cell."""
        return softmax(self.q_table[self.cell(x)] / self.alpha, axis=-1)

    def log_z(self, x):
        q = self.q_table[self.cell(x)]
        return logsumexp(q / self.alpha, axis=-1) + self.log_cell_volume

    def mode(self, x):
        # np.argmax keeps the lowest index among ties
        best = np.argmax(self.q_table[self.cell(x)], axis=-1)
        return self.action_grid.actions()[best]

    def boltzmann_mean(self) -> np.ndarray:
        """Expected action per grid cell, shape ``(n_cells, action_dim)``."""
        probs = softmax(self.q_table / self.alpha, axis=-1)
        return probs @ self.action_grid.actions()

    def log_prob(self, x, u):
        """Log density of the action cell nearest to ``u`` (mass over cell volume)."""
        idx = self.cell(x)
        q = self.q_table[idx]
        a = self.action_grid.nearest(u)
        log_z = logsumexp(q / self.alpha, axis=-1) + self.log_cell_volume
        q_a = np.take_along_axis(q, np.expand_dims(a, -1), axis=-1)[..., 0]
        return q_a / self.alpha - log_z

    def sample(self, x, rng: np.random.Generator):
        probs = self.probabilities(x)
        flat = probs.reshape(-1, probs.shape[-1])
        picks = np.array([rng.choice(len(p), p=p) for p in flat])
        return self.action_grid.actions()[picks.reshape(probs.shape[:-1])]


def save_tabular(policy: TabularSoftPolicy, path):
    g = policy.grid
    blob = b"".join(
        [
            header(TABULAR_MAGIC, TABULAR_VERSION),
            pack_array([policy.alpha]),
            pack_array(g.low),
            pack_array(g.high),
            pack_array(np.asarray(g.bins, dtype=np.float64)),
            pack_array([len(policy.action_grid.values)]),
            *[pack_array(v) for v in policy.action_grid.values],
            pack_array(policy.q_table),
        ]
    )
    write_bytes(path, blob)


def load_tabular(path) -> TabularSoftPolicy:
    reader = Reader(read_bytes(path))
    reader.expect_header(TABULAR_MAGIC, TABULAR_VERSION)
    (alpha,) = reader.array()
    low, high, bins = reader.array(), reader.array(), reader.array()
    (n_action_dims,) = reader.array()
    values = tuple(reader.array() for _ in range(int(n_action_dims)))
    q = reader.array()
    grid = StateGrid(low, high, tuple(int(b) for b in bins))
    return TabularSoftPolicy(grid, ActionGrid(values), q, float(alpha))
