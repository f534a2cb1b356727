import json

import numpy as np
import pytest

from conftest import FIXTURES
from rmppi.envs import LineMass, Pendulum
from rmppi.errors import ConfigError, ContractError, EnumerationLimitError
from rmppi.mdp import ActionGrid, StateGrid
from rmppi.oracle import (
    FixtureCase,
    GridSpec,
    augmented_optimal_action,
    boltzmann_product,
    check_rql_equivalence,
    discretize_env,
    load_fixture_suite,
    factorization_gap,
    random_mdp,
    run_fixture_suite,
    sequence_distribution,
    total_variation,
    write_report,
)
from rmppi.oracle.sequences import action_sequences
from rmppi.priors import TabularSoftPolicy, soft_q_iteration


def test_closed_form_matches_boltzmann_product():
    rng = np.random.default_rng(3)
    for _ in range(20):
        mdp = random_mdp(rng, 4, 3)
        sol = soft_q_iteration(mdp, alpha=0.8, horizon=3)
        assert factorization_gap(mdp, sol, 3) < 1e-10


def test_shorter_windows_use_the_stage_value(rng):
    mdp = random_mdp(rng, 3, 2)
    sol = soft_q_iteration(mdp, alpha=1.0, horizon=5)
    seqs, closed = sequence_distribution(mdp, sol, 1, 2)
    _, product = boltzmann_product(mdp, sol, 1, 2)
    assert seqs.shape == (4, 2)
    assert closed.sum() == pytest.approx(1.0)
    assert total_variation(closed, product) < 1e-12


def test_sequence_checks(rng):
    mdp = random_mdp(rng, 3, 2)
    sol = soft_q_iteration(mdp, alpha=1.0, horizon=2)
    with pytest.raises(ContractError):
        sequence_distribution(mdp, sol, 0, 3)
    with pytest.raises(ContractError):
        sequence_distribution(mdp, sol, 5, 1)
    discounted = soft_q_iteration(mdp, alpha=1.0, gamma=0.9)
    with pytest.raises(ConfigError):
        boltzmann_product(mdp, discounted, 0, 2)
    with pytest.raises(EnumerationLimitError):
        action_sequences(10, 7)


def test_total_variation():
    assert total_variation([0.5, 0.5], [1.0, 0.0]) == pytest.approx(0.5)
    assert total_variation([0.2, 0.8], [0.2, 0.8]) == 0.0


def test_augmented_task_reproduces_full_task(rng):
    mdp = random_mdp(rng, 6, 3)
    report = check_rql_equivalence(mdp, 1.5, mdp.addon, omega_prime=0.7, alpha=0.7, horizon=4)
    assert report.per_state_tv.shape == (6,)
    assert report.max_tv < 1e-10


def test_augmented_task_infinite_horizon(rng):
    mdp = random_mdp(rng, 4, 3)
    report = check_rql_equivalence(mdp, 1.0, mdp.addon, 1.0, 1.0, horizon=None, gamma=0.9)
    assert report.max_tv < 1e-8


def test_wrong_prior_weight_breaks_equivalence(rng):
    mdp = random_mdp(rng, 4, 3)
    report = check_rql_equivalence(mdp, 1.0, mdp.addon, omega_prime=10.0, alpha=1.0)
    assert report.max_tv > 1e-3


def test_equivalence_needs_stationary_reward(rng):
    mdp = random_mdp(rng, 3, 2)
    staged = mdp.with_reward(np.zeros((4, 3, 2)))
    with pytest.raises(ConfigError):
        check_rql_equivalence(staged, 1.0, np.zeros((3, 2)), 1.0, 1.0)
    with pytest.raises(ConfigError):
        check_rql_equivalence(mdp, 1.0, np.zeros((2, 2)), 1.0, 1.0)


@pytest.fixture
def pendulum_grid():
    return GridSpec(
        StateGrid(np.array([-np.pi, -8.0]), np.array([np.pi, 8.0]), (9, 9)),
        ActionGrid((np.array([-2.0, 0.0, 2.0]),)),
    )


def test_discretize_pendulum(pendulum_grid):
    env = Pendulum()
    mdp = discretize_env(env, pendulum_grid)
    assert mdp.transition.shape == (81, 3)
    assert mdp.addon.shape == (81, 3)
    assert mdp.action_cell_volume == pytest.approx(2.0)
    # same environment and grid hit the cache
    again = discretize_env(Pendulum(), pendulum_grid)
    assert again.transition is mdp.transition
    assert discretize_env(Pendulum(mass=2.0), pendulum_grid).transition is not mdp.transition


def test_cached_discretization_cannot_be_mutated(pendulum_grid):
    mdp = discretize_env(Pendulum(), pendulum_grid)
    before = mdp.reward.copy()
    with pytest.raises(ValueError):
        mdp.reward[0, 0] = 1e6
    with pytest.raises(ValueError):
        mdp.transition[0, 0] = 0
    with pytest.raises(ValueError):
        mdp.addon[...] = 0.0
    mdp.reward = np.zeros_like(before)
    again = discretize_env(Pendulum(), pendulum_grid)
    assert again is not mdp
    np.testing.assert_array_equal(again.reward, before)


def test_line_mass_lattice_is_exact():
    env = LineMass()
    grid = GridSpec(
        StateGrid(np.array([-1.25, -2.5]), np.array([1.25, 2.5]), (21, 21)),
        ActionGrid((np.linspace(-1.0, 1.0, 5),)),
    )
    mdp = discretize_env(env, grid)
    centers = grid.states.centers()
    x = np.repeat(centers[:, None, :], 5, axis=1)
    u = np.broadcast_to(grid.actions.actions(), (len(centers), 5, 1))
    np.testing.assert_allclose(centers[mdp.transition], env.step(x, u), atol=1e-12)


def test_discretize_rejects_coarse_box():
    grid = GridSpec(
        StateGrid(np.array([-np.pi, -1.0]), np.array([np.pi, 1.0]), (5, 3)),
        ActionGrid((np.array([-2.0, 2.0]),)),
    )
    with pytest.raises(ConfigError, match="leave the box"):
        discretize_env(Pendulum(), grid)
    with pytest.raises(ConfigError):
        discretize_env(Pendulum(), GridSpec(grid.states, ActionGrid((np.zeros(1), np.zeros(1)))))


def test_augmented_optimal_action(pendulum_grid):
    env = Pendulum()
    mdp = discretize_env(env, pendulum_grid)
    sol = soft_q_iteration(mdp, alpha=1.0, gamma=0.9)
    prior = TabularSoftPolicy.from_solution(pendulum_grid.states, pendulum_grid.actions, sol)
    best, row = augmented_optimal_action(mdp, prior, mdp.addon, 1.0, 1.0, np.array([0.1, 0.0]), 5, 0.9)
    assert row.shape == (3,)
    assert row.sum() == pytest.approx(1.0)
    assert best == int(np.argmax(row))
    with pytest.raises(ConfigError):
        augmented_optimal_action(mdp, prior, mdp.addon, 1.0, 1.0, np.array([0.0, 20.0]))


def test_committed_suite_holds():
    cases = load_fixture_suite(FIXTURES / "oracle_suite.json")
    report = run_fixture_suite(cases)
    assert report.ok, [r for r in report.violations]
    statuses = {r.name: r.status for r in report.results}
    assert statuses["mismatched-prior-weight"] == "expected-fail"
    assert statuses["sequence-distribution-sweep"] == "pass"


def test_negative_control_that_passes_is_a_violation():
    case = FixtureCase("control", "rql", seed=1, count=2, expect="fail", tolerance=1e-6)
    report = run_fixture_suite([case])
    assert report.results[0].status == "unexpected-pass"
    assert not report.ok


def test_inline_mdp_case():
    case = FixtureCase(
        "inline",
        "factorization",
        horizon=2,
        mdp={"transition": [[0, 1], [0, 0]], "reward": [[1.0, 0.0], [0.0, 2.0]]},
    )
    assert run_fixture_suite([case]).ok
    with pytest.raises(ConfigError):
        next(FixtureCase("broken", "factorization", mdp={"reward": [[0.0]]}).mdps())


@pytest.mark.parametrize(
    "suite, message",
    [
        ({"cases": []}, "non-empty"),
        ({"cases": [{"name": "a", "kind": "rql", "colour": 1}]}, "unknown keys"),
        ({"cases": [{"name": "a", "kind": "rql"}, {"name": "a", "kind": "rql"}]}, "duplicate"),
        ({"cases": [{"name": "a", "kind": "exhaustive"}]}, "unknown kind"),
        ({"cases": [{"kind": "rql"}]}, "needs 'name'"),
    ],
)
def test_suite_validation(tmp_path, suite, message):
    path = tmp_path / "suite.json"
    path.write_text(json.dumps(suite))
    with pytest.raises(ConfigError, match=message):
        load_fixture_suite(path)


def test_report_file(tmp_path):
    report = run_fixture_suite([FixtureCase("small", "factorization", count=3)])
    write_report(report, tmp_path / "out" / "report.json")
    data = json.loads((tmp_path / "out" / "report.json").read_text())
    assert data["ok"] is True
    assert data["results"][0]["name"] == "small"
