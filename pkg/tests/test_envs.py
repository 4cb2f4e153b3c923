import math

import numpy as np
import pytest

from natgrad import distributions as dist
from natgrad import envs
from natgrad.envs import GaussianBandit, Gridworld, Trajectory
from natgrad.errors import InvalidArgumentError

G = dist.gaussian_family()
C4 = dist.categorical_family(4)


def traj(rewards, scores=None):
    n = len(rewards)
    scores = np.zeros((n, 2)) if scores is None else np.asarray(scores, float)
    return Trajectory(np.zeros(n, int), np.zeros(n), np.asarray(rewards, float), scores, 0)


class TestGridworld:
    def test_walls_clip(self):
        g = Gridworld(2, 2, (0, 0), (1, 1))
        assert g.move((0, 0), envs.UP) == (0, 0)
        assert g.move((0, 0), envs.LEFT) == (0, 0)
        assert g.move((0, 0), envs.RIGHT) == (1, 0)
        assert g.move((1, 0), envs.DOWN) == (1, 1)

    @pytest.mark.parametrize("kwargs", [
        dict(start=(1, 1), goal=(1, 1)),
        dict(horizon=0),
        dict(goal=(5, 5)),
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(InvalidArgumentError):
            Gridworld(**kwargs)


class TestRollout:
    def test_bandit_single_step(self):
        env = GaussianBandit(2.0)
        th = dist.params([0.3, 0.7])
        t = envs.rollout(env, G, th, 5)
        assert len(t) == 1
        a = t.actions[0]
        assert t.rewards[0] == pytest.approx(-(a - 2.0) ** 2, abs=1e-15)
        np.testing.assert_allclose(t.scores[0], dist.score(G, th, a).values, rtol=1e-15)

    def test_saturated_gridworld_shortest_path(self):
        env = Gridworld(2, 2, (0, 0), (1, 1), horizon=10)
        logits = np.zeros((4, 4))
        logits[env.state_id((0, 0)), envs.RIGHT] = 1e9
        logits[env.state_id((1, 0)), envs.DOWN] = 1e9
        t = envs.rollout(env, C4, dist.params(logits.ravel()), 0)
        assert len(t) == 2
        assert t.states.tolist() == [0, 1] and t.actions.tolist() == [envs.RIGHT, envs.DOWN]
        assert t.rewards.tolist() == [env.step_reward, env.goal_reward]

    def test_horizon_cap(self):
        env = Gridworld(4, 4, horizon=5)
        th = dist.params(np.zeros(64))
        for s in range(50):
            assert len(envs.rollout(env, C4, th, s)) <= 5

    def test_gridworld_scores_match_blockwise_score(self):
        env = Gridworld(3, 3, (0, 0), (2, 2), horizon=20)
        th = dist.params(np.random.default_rng(0).normal(size=36))
        t = envs.rollout(env, C4, th, 3)
        for k, (s, a) in enumerate(zip(t.states, t.actions)):
            expected = np.zeros(36)
            expected[4 * s:4 * s + 4] = dist.score(C4, dist.state_block(C4, th, s), a).values
            np.testing.assert_allclose(t.scores[k], expected, atol=1e-15)

    @pytest.mark.parametrize("env, family, theta", [
        (GaussianBandit(1.0), G, dist.params([0.0, 1.0])),
        (Gridworld(3, 3, (0, 0), (2, 2)), C4, dist.params(np.linspace(-1, 1, 36))),
    ])
    def test_seed_determinism(self, env, family, theta):
        assert envs.rollout(env, family, theta, 123) == envs.rollout(env, family, theta, 123)
        a = envs.rollout_batch(env, family, theta, 20, 9)
        b = envs.rollout_batch(env, family, theta, 20, 9)
        assert all(x == y for x, y in zip(a, b))

    def test_shape_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            envs.rollout(GaussianBandit(), C4, dist.params([0, 0, 0, 0]), 0)
        with pytest.raises(InvalidArgumentError):
            envs.rollout(Gridworld(2, 2, (0, 0), (1, 1)), C4, dist.params(np.zeros(8)), 0)

    def test_batch_matches_trajectory_view(self):
        batch = envs.rollout_batch(GaussianBandit(), G, dist.params([0, 1]), 10, 4)
        as_list = list(batch)
        assert envs.estimate_objective(batch) == pytest.approx(envs.estimate_objective(as_list), rel=1e-15)
        np.testing.assert_allclose(envs.reinforce_gradient(batch, baseline="mean-return").values,
                                   envs.reinforce_gradient(as_list, baseline="mean-return").values,
                                   rtol=1e-14)


class TestEstimateObjective:
    def test_discounted(self):
        assert envs.estimate_objective([traj([1, 1])], 0.5) == 1.5

    @pytest.mark.parametrize("gamma", [0.0, 0.3, 1.0])
    def test_single_reward(self, gamma):
        assert envs.estimate_objective([traj([1])], gamma) == 1.0

    def test_mean(self):
        assert envs.estimate_objective([traj([2]), traj([4])]) == 3.0

    def test_empty(self):
        with pytest.raises(InvalidArgumentError):
            envs.estimate_objective([])

    def test_bandit_objective(self):
        batch = envs.rollout_batch(GaussianBandit(0.0), G, dist.params([0, 1]), 100_000, 0)
        assert abs(envs.estimate_objective(batch) + 1.0) <= 0.02


class TestReinforce:
    def test_single(self):
        g = envs.reinforce_gradient([traj([1], [[1, 0]])])
        np.testing.assert_array_equal(g.values, [1, 0])

    def test_cancellation(self):
        g = envs.reinforce_gradient([traj([1], [[1, 0]]), traj([1], [[-1, 0]])])
        np.testing.assert_array_equal(g.values, [0, 0])

    def test_reward_to_go(self):
        # G_0 = 1 + 0.5*2 = 2, G_1 = 2
        t = traj([1, 2], [[1, 0], [0, 1]])
        np.testing.assert_allclose(envs.reinforce_gradient([t], 0.5).values, [2, 2])

    def test_mean_return_baseline(self):
        t1, t2 = traj([1], [[1, 0]]), traj([3], [[0, 1]])
        # b = 2
        np.testing.assert_allclose(envs.reinforce_gradient([t1, t2], baseline="mean-return").values,
                                   [-0.5, 0.5])

    def test_empty(self):
        with pytest.raises(InvalidArgumentError):
            envs.reinforce_gradient([])

    def test_unknown_baseline(self):
        with pytest.raises(InvalidArgumentError):
            envs.reinforce_gradient([traj([1])], baseline="critic")

    def test_bandit_example(self):
        batch = envs.rollout_batch(GaussianBandit(2.0), G, dist.params([0, 1]), 100_000, 1)
        g = envs.reinforce_gradient(batch)
        assert abs(g.values[0] - 4.0) <= 0.15

    @pytest.mark.parametrize("baseline", ["none", "mean-return"])
    @pytest.mark.parametrize("mu, sigma, target", [(0.0, 1.0, 2.0), (1.0, 0.5, -1.0)])
    def test_matches_analytic_gradient(self, baseline, mu, sigma, target):
        env = GaussianBandit(target)
        batch = envs.rollout_batch(env, G, dist.params([mu, sigma]), 100_000, 2)
        terms = envs.reinforce_terms(batch, baseline=baseline)
        se = terms.std(axis=0, ddof=1) / math.sqrt(len(terms))
        diff = np.abs(terms.mean(axis=0) - env.expected_gradient(mu, sigma))
        assert np.all(diff <= 4 * se)

    def test_baseline_invariance(self):
        batch = envs.rollout_batch(GaussianBandit(2.0), G, dist.params([0.5, 0.8]), 100_000, 3)
        t0 = envs.reinforce_terms(batch, baseline="none")
        t1 = envs.reinforce_terms(batch, baseline="mean-return")
        se = np.hypot(t0.std(axis=0), t1.std(axis=0)) / math.sqrt(len(t0))
        assert np.all(np.abs(t0.mean(axis=0) - t1.mean(axis=0)) <= 4 * se)
        assert np.all(t1.var(axis=0) < t0.var(axis=0))

    def test_gridworld_gradient_matches_finite_difference_of_exact_return(self):
        # 1x2 corridor: start left, goal right; exact J by enumerating action sequences
        env = Gridworld(2, 1, (0, 0), (1, 0), step_reward=-0.1, goal_reward=1.0, horizon=3)
        theta = np.array([0.3, 0.2, -0.1, 0.0, 0, 0, 0, 0])
        # reward-to-go without a gamma**t prefactor is unbiased only at gamma = 1
        gamma = 1.0

        def exact_j(v):
            p = dist.softmax_probs(dist.params(v[:4]))
            # RIGHT reaches the goal; every other move stays put
            stay = 1 - p[envs.RIGHT]
            j, alive = 0.0, 1.0
            for t in range(env.horizon):
                j += alive * gamma**t * (p[envs.RIGHT] * env.goal_reward + stay * env.step_reward)
                alive *= stay
            return j

        h = 1e-6
        fd = np.array([(exact_j(theta + h * e) - exact_j(theta - h * e)) / (2 * h) for e in np.eye(8)])
        batch = envs.rollout_batch(env, C4, dist.params(theta), 40_000, 0)
        terms = envs.reinforce_terms(batch, gamma, "mean-return")
        se = terms.std(axis=0, ddof=1) / math.sqrt(len(terms)) + 1e-12
        assert np.all(np.abs(terms.mean(axis=0) - fd) <= 4 * se)
        assert envs.estimate_objective(batch, gamma) == pytest.approx(exact_j(theta), abs=0.01)

    def test_visit_frequencies(self):
        ts = [Trajectory(np.array([0, 1, 1]), np.zeros(3), np.zeros(3), np.zeros((3, 8)), 0),
              Trajectory(np.array([1]), np.zeros(1), np.zeros(1), np.zeros((1, 8)), 0)]
        np.testing.assert_allclose(envs.state_visit_frequencies(ts, 2), [0.25, 0.75])
