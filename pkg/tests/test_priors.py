import logging

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import norm

from conftest import FIXTURES
from rmppi.envs import circle_track
from rmppi.errors import ConfigError
from rmppi.mdp import ActionGrid, StateGrid
from rmppi.priors import (
    GaussianPolicy,
    LinearFeedback,
    MlpMean,
    TabularInterpolatedMean,
    TabularSoftPolicy,
    TrackFollower,
    load_tabular,
    policy_log_prob,
    policy_mode,
    policy_sample,
    save_tabular,
    tabular_to_continuous,
)


@pytest.fixture
def tabular():
    grid = StateGrid(np.array([0.0]), np.array([1.0]), (3,))
    actions = ActionGrid((np.array([-1.0, 0.0, 1.0]),))
    q = np.array([[0.0, 1.0, 1.0], [2.0, 0.0, 0.0], [0.0, 0.0, 3.0]])
    return TabularSoftPolicy(grid, actions, q, alpha=0.5)


def test_gaussian_log_prob_matches_scipy(rng):
    policy = GaussianPolicy(LinearFeedback(np.array([[1.0, 0.0], [0.0, -2.0]])), [0.5, 2.0])
    x = rng.normal(size=(4, 2))
    u = rng.normal(size=(4, 2))
    mu = policy_mode(policy, x)
    expected = norm.logpdf(u, mu, np.sqrt([0.5, 2.0])).sum(axis=1)
    np.testing.assert_allclose(policy_log_prob(policy, x, u), expected)


def test_gaussian_density_examples(rng):
    policy = GaussianPolicy(LinearFeedback(np.array([[-1.0]])), [0.3])
    x = np.array([0.3])
    mu = policy.mode(x)[0]
    sigma = np.sqrt(0.3)
    assert mu == pytest.approx(-0.3)
    mass, _ = quad(lambda u: float(np.exp(policy.log_prob(x, np.array([u])))), mu - 8 * sigma, mu + 8 * sigma)
    assert mass == pytest.approx(1.0, abs=1e-6)
    assert policy.log_prob(x, np.array([mu + sigma])) == pytest.approx(
        -0.5 * np.log(2 * np.pi) - 0.5 - np.log(sigma)
    )
    unit = GaussianPolicy(LinearFeedback(np.zeros((1, 1))), 1.0)
    assert unit.log_prob(np.zeros(1), np.zeros(1)) == pytest.approx(-0.918938533, abs=1e-9)
    # the mode is the most likely action
    for delta in rng.normal(size=20):
        assert policy.log_prob(x, np.array([mu])) > policy.log_prob(x, np.array([mu + delta]))


def test_gaussian_sampling_is_deterministic_per_stream():
    policy = GaussianPolicy(LinearFeedback(np.zeros((2, 2))), [0.1, 0.2])
    a = policy.sample(np.zeros(2), np.random.default_rng(5))
    b = policy.sample(np.zeros(2), np.random.default_rng(5))
    np.testing.assert_array_equal(a, b)


def test_gaussian_variance_checks():
    mean = LinearFeedback(np.zeros((2, 3)))
    np.testing.assert_allclose(GaussianPolicy(mean, 0.3).variance, [0.3, 0.3])
    with pytest.raises(ConfigError):
        GaussianPolicy(mean, [0.1, 0.2, 0.3])
    with pytest.raises(ConfigError):
        GaussianPolicy(mean, [0.1, 0.0])


def test_gaussian_sample_is_centered_on_mode(rng):
    policy = GaussianPolicy(LinearFeedback(np.zeros((1, 1)), [0.7]), 0.04)
    draws = policy_sample(policy, np.zeros((20000, 1)), rng)
    assert draws.mean() == pytest.approx(0.7, abs=0.01)
    assert draws.std() == pytest.approx(0.2, abs=0.01)


def test_mlp_mean_from_weight_file():
    mean = MlpMean.from_file(FIXTURES / "reference_mlp.rmnn")
    policy = GaussianPolicy(mean, 1.0)
    assert policy.backing == "mlp_loaded"
    np.testing.assert_allclose(policy.mode(np.array([1.0, 0.5])), [2.75])


def test_tabular_mode_probabilities_and_density(tabular):
    # ties resolve to the lowest action index
    np.testing.assert_allclose(tabular.mode(np.array([0.0])), [0.0])
    np.testing.assert_allclose(tabular.mode(np.array([[0.5], [1.0]])), [[-1.0], [1.0]])
    probs = tabular.probabilities(np.array([1.0]))
    np.testing.assert_allclose(probs.sum(), 1.0)
    # unit cell volume: log density equals log mass
    np.testing.assert_allclose(tabular.log_prob(np.array([1.0]), np.array([0.9])), np.log(probs[2]))
    # actions snap to the nearest cell
    np.testing.assert_allclose(
        tabular.log_prob(np.array([0.0]), np.array([0.4])),
        tabular.log_prob(np.array([0.0]), np.array([0.0])),
    )


def test_tabular_sampling_stays_on_the_action_grid(tabular, rng):
    draws = tabular.sample(np.full((500, 1), 1.0), rng)
    assert draws.shape == (500, 1)
    assert set(np.unique(draws)) <= {-1.0, 0.0, 1.0}
    # exp(3 / 0.5) dominates the row
    assert np.mean(draws[:, 0] == 1.0) > 0.95


def test_tabular_clamps_are_counted(tabular, caplog):
    with caplog.at_level(logging.WARNING):
        tabular.mode(np.array([[5.0], [0.5]]))
    assert tabular.clamps.count == 1
    assert "outside the grid" in caplog.text


def test_tabular_file(tmp_path, tabular):
    save_tabular(tabular, tmp_path / "prior.rmtb")
    loaded = load_tabular(tmp_path / "prior.rmtb")
    assert loaded.alpha == tabular.alpha
    assert loaded.grid.bins == tabular.grid.bins
    np.testing.assert_array_equal(loaded.q_table, tabular.q_table)


def test_interpolated_mean_is_multilinear():
    grid = StateGrid(np.array([0.0, 0.0]), np.array([1.0, 1.0]), (2, 2))
    mean = TabularInterpolatedMean(grid, np.array([[0.0], [1.0], [2.0], [3.0]]))
    np.testing.assert_allclose(mean(np.array([1.0, 0.0])), [2.0])
    np.testing.assert_allclose(mean(np.array([0.5, 0.5])), [1.5])
    np.testing.assert_allclose(mean(np.array([0.25, 1.0])), [1.5])


def test_tabular_to_continuous(tabular):
    policy = tabular_to_continuous(tabular, 0.1)
    np.testing.assert_allclose(policy.variance, [0.01])
    np.testing.assert_allclose(policy.mode(np.array([0.5])), tabular.boltzmann_mean()[1])
    with pytest.raises(ConfigError):
        tabular_to_continuous(tabular, 0.0)


def test_track_follower_turns_with_the_track():
    track = circle_track(20.0)
    follower = TrackFollower(track, wheelbase=2.5, lookahead=5.0, target_speed=8.0, speed_gain=0.5)
    x = np.array([20.0, 0.0, np.pi / 2, 6.0])
    steer, accel = follower(x)
    # counter-clockwise circle: steer left
    assert steer > 0
    # pure pursuit on a circle of radius R asks for atan(L / R)
    assert steer == pytest.approx(np.arctan(2.5 / 20.0), rel=0.05)
    assert accel == pytest.approx(1.0)
    with pytest.raises(ConfigError):
        TrackFollower(track, lookahead=0.0)
