import numpy as np
import pytest

from rmppi.errors import ConfigError, ContractError, SoftQConvergenceError
from rmppi.mdp import ActionGrid, DiscreteMDP, StateGrid
from rmppi.oracle import random_mdp
from rmppi.priors import soft_bellman_residual, soft_q_iteration


def test_single_state_closed_form():
    mdp = DiscreteMDP(np.zeros((1, 2)), np.array([[0.0, np.log(3.0)]]))
    sol = soft_q_iteration(mdp, alpha=1.0, horizon=1)
    np.testing.assert_allclose(sol.boltzmann(0), [[0.25, 0.75]])
    assert sol.v[0] == pytest.approx(np.log(4.0))
    assert sol.value_after(1)[0] == 0.0


def test_finite_horizon_is_an_exact_backup(rng):
    mdp = random_mdp(rng, 5, 3)
    sol = soft_q_iteration(mdp, alpha=0.7, horizon=6)
    assert sol.n_stages == 6
    assert soft_bellman_residual(mdp, sol) < 1e-12


def test_infinite_horizon_fixed_point(rng):
    mdp = random_mdp(rng, 6, 4)
    sol = soft_q_iteration(mdp, alpha=0.5, gamma=0.9, tol=1e-12)
    assert sol.horizon is None and sol.n_stages == 1
    assert soft_bellman_residual(mdp, sol) < 1e-10
    # every stage maps to the stationary table
    np.testing.assert_array_equal(sol.boltzmann(7), sol.boltzmann(0))


def test_log_density_integrates_to_one(rng):
    mdp = DiscreteMDP(rng.integers(0, 3, size=(3, 4)), rng.normal(size=(3, 4)), 0.25)
    sol = soft_q_iteration(mdp, alpha=2.0, horizon=3)
    for t in range(3):
        mass = np.exp(sol.log_density(t)) * mdp.action_cell_volume
        np.testing.assert_allclose(mass.sum(axis=1), 1.0)
        np.testing.assert_allclose(mass, sol.boltzmann(t))


def test_invalid_requests(rng):
    mdp = random_mdp(rng, 3, 2)
    with pytest.raises(ConfigError):
        soft_q_iteration(mdp, alpha=0.0)
    with pytest.raises(ConfigError):
        soft_q_iteration(mdp, alpha=1.0, gamma=1.0)
    staged = mdp.with_reward(rng.normal(size=(2, 3, 2)))
    with pytest.raises(ConfigError):
        soft_q_iteration(staged, alpha=1.0, horizon=3)
    sol = soft_q_iteration(mdp, alpha=1.0, horizon=2)
    with pytest.raises(ContractError):
        sol.boltzmann(2)


def test_non_convergence_is_reported(rng):
    mdp = random_mdp(rng, 4, 2)
    with pytest.raises(SoftQConvergenceError) as info:
        soft_q_iteration(mdp, alpha=1.0, gamma=0.99, max_iterations=3)
    assert info.value.iterations == 3


def test_mdp_validation():
    with pytest.raises(ConfigError):
        DiscreteMDP(np.array([[0, 2]]), np.zeros((1, 2)))
    with pytest.raises(ConfigError):
        DiscreteMDP(np.zeros((2, 2)), np.zeros((2, 3)))
    with pytest.raises(ConfigError):
        DiscreteMDP(np.zeros((1, 1)), np.array([[np.inf]]))
    mdp = DiscreteMDP(np.array([[1, 0], [1, 1]]), np.zeros((2, 2)))
    assert mdp.trace(0, [0, 1, 0]) == [0, 1, 1, 1]


def test_state_grid_indexing():
    grid = StateGrid(np.array([0.0, -1.0]), np.array([1.0, 1.0]), (3, 5))
    assert grid.n_cells == 15
    np.testing.assert_allclose(grid.spacing, [0.5, 0.5])
    # midpoints resolve to the upper cell, far points clamp to the edge
    np.testing.assert_array_equal(grid.multi_index(np.array([0.25, -1.0])), [1, 0])
    np.testing.assert_array_equal(grid.multi_index(np.array([9.0, -9.0])), [2, 0])
    assert grid.index(np.array([1.0, 1.0])) == 14
    np.testing.assert_allclose(grid.center(7), [0.5, 0.0])
    assert grid.outside(np.array([1.3, 0.0]))
    assert not grid.outside(np.array([1.2, 0.0]))


def test_action_grid():
    grid = ActionGrid((np.array([-1.0, 0.0, 1.0]), np.array([0.0, 2.0])))
    assert grid.n_actions == 6
    assert grid.cell_volume == pytest.approx(2.0)
    np.testing.assert_allclose(grid.actions()[1], [-1.0, 2.0])
    # tie between -1 and 0 goes to the lower index
    assert grid.nearest(np.array([-0.5, 0.0])) == 0
    with pytest.raises(ConfigError):
        ActionGrid((np.array([1.0, 0.0]),))
