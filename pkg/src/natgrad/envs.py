"""Toy environments, seeded rollouts, and the REINFORCE estimator.

Two environments:

``GaussianBandit``
    One decision, a real action ``a`` drawn from a Gaussian policy, reward
    ``-(a - target)**2``. The expected return is
    ``J(mu, sigma) = -((mu - target)**2 + sigma**2)``.

``Gridworld``
    A ``width x height`` grid with a tabular softmax policy (4 logits per
    cell). Actions move up/right/down/left and are clipped at the walls.
    Entering the goal pays ``goal_reward`` and ends the episode; every other
    step pays ``step_reward``. Episodes are cut at ``horizon`` steps.

States are row-major cell indices ``y * width + x``; ``y`` grows downward.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy.special import softmax

from . import distributions as dist
from .distributions import CATEGORICAL, GAUSSIAN, ParamVector, PolicyFamily
from .errors import InvalidArgumentError

UP, RIGHT, DOWN, LEFT = range(4)
_MOVES = {UP: (0, -1), RIGHT: (1, 0), DOWN: (0, 1), LEFT: (-1, 0)}

BASELINES = ("none", "mean-return")


@dataclass(frozen=True)
class GaussianBandit:
    target: float = 2.0
    kind: str = field(default="gaussian-bandit", init=False)

    def reward(self, action):
        return -(np.asarray(action, dtype=float) - self.target) ** 2

    def expected_return(self, mu: float, sigma: float) -> float:
        return -((mu - self.target) ** 2 + sigma**2)

    def expected_gradient(self, mu: float, sigma: float) -> np.ndarray:
        """Gradient of :meth:`expected_return` in the natural ``(mu, sigma)`` chart."""
        return np.array([-2.0 * (mu - self.target), -2.0 * sigma])

    @property
    def n_states(self) -> int:
        return 1


@dataclass(frozen=True)
class Gridworld:
    width: int = 4
    height: int = 4
    start: tuple[int, int] = (0, 0)
    goal: tuple[int, int] = (3, 3)
    step_reward: float = -0.01
    goal_reward: float = 1.0
    horizon: int = 50
    kind: str = field(default="gridworld", init=False)

    def __post_init__(self):
        object.__setattr__(self, "start", tuple(int(v) for v in self.start))
        object.__setattr__(self, "goal", tuple(int(v) for v in self.goal))
        if self.width < 1 or self.height < 1:
            raise InvalidArgumentError("grid dimensions must be positive")
        if self.horizon < 1:
            raise InvalidArgumentError("horizon must be at least 1")
        for name, (x, y) in (("start", self.start), ("goal", self.goal)):
            if not (0 <= x < self.width and 0 <= y < self.height):
                raise InvalidArgumentError(f"{name} cell {(x, y)} is off the grid")
        if self.start == self.goal:
            raise InvalidArgumentError("goal must differ from start")

    @property
    def n_states(self) -> int:
        return self.width * self.height

    def state_id(self, cell: tuple[int, int]) -> int:
        return cell[1] * self.width + cell[0]

    def move(self, cell: tuple[int, int], action: int) -> tuple[int, int]:
        dx, dy = _MOVES[int(action)]
        x = min(max(cell[0] + dx, 0), self.width - 1)
        y = min(max(cell[1] + dy, 0), self.height - 1)
        return x, y


Environment = GaussianBandit | Gridworld


@dataclass(frozen=True)
class Trajectory:
    """One episode.

    ``states``, ``actions`` and ``rewards`` are aligned per step. ``scores``
    has one row per step holding the full-length gradient of
    ``log pi(a_t | s_t)`` with respect to every policy parameter.
    """

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    scores: np.ndarray
    seed: int

    def __post_init__(self):
        n = len(self.rewards)
        if not (len(self.states) == len(self.actions) == self.scores.shape[0] == n):
            raise InvalidArgumentError("trajectory fields have inconsistent lengths")
        if not np.all(np.isfinite(self.rewards)):
            raise InvalidArgumentError("non-finite reward in trajectory")

    def __len__(self) -> int:
        return len(self.rewards)

    @property
    def steps(self) -> list[tuple]:
        return list(zip(self.states.tolist(), self.actions.tolist(), self.rewards.tolist()))

    def discounted_return(self, gamma: float) -> float:
        return float(np.sum(gamma ** np.arange(len(self)) * self.rewards))

    def rewards_to_go(self, gamma: float) -> np.ndarray:
        g = np.empty(len(self))
        acc = 0.0
        for t in range(len(self) - 1, -1, -1):
            acc = self.rewards[t] + gamma * acc
            g[t] = acc
        return g

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return self.seed == other.seed and all(
            np.array_equal(getattr(self, k), getattr(other, k))
            for k in ("states", "actions", "rewards", "scores")
        )

    __hash__ = None


class TrajectoryBatch(Sequence):
    """A batch of one-step episodes stored as stacked arrays.

    Behaves as a sequence of :class:`Trajectory`; indexing builds the
    trajectory on demand. The estimators below read the arrays directly.
    """

    def __init__(self, actions: np.ndarray, rewards: np.ndarray, scores: np.ndarray, seed: int):
        if not (len(actions) == len(rewards) == scores.shape[0]):
            raise InvalidArgumentError("batch fields have inconsistent lengths")
        if not np.all(np.isfinite(rewards)):
            raise InvalidArgumentError("non-finite reward in batch")
        for a in (actions, rewards, scores):
            a.setflags(write=False)
        self.actions, self.rewards, self.scores, self.seed = actions, rewards, scores, seed

    def __len__(self) -> int:
        return len(self.rewards)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        i = range(len(self))[i]
        return Trajectory(np.zeros(1, dtype=int), self.actions[i:i + 1],
                          self.rewards[i:i + 1], self.scores[i:i + 1], self.seed)


def check_policy_shape(env: Environment, family: PolicyFamily, theta: ParamVector) -> None:
    if env.kind == "gaussian-bandit":
        if family.kind != GAUSSIAN or len(theta) != family.dimension:
            raise InvalidArgumentError("the Gaussian bandit needs a single gaussian-diag policy")
    else:
        if family.kind != CATEGORICAL or family.dimension != 4:
            raise InvalidArgumentError("the gridworld needs a 4-way categorical-softmax policy")
        if len(theta) != 4 * env.n_states:
            raise InvalidArgumentError(
                f"gridworld policy needs {4 * env.n_states} logits, got {len(theta)}"
            )
    if theta.chart != family.chart:
        raise InvalidArgumentError("theta chart does not match family chart")


def rollout(env: Environment, family: PolicyFamily, theta: ParamVector, seed: int) -> Trajectory:
    """Run one episode under ``theta``; deterministic in ``seed``."""
    check_policy_shape(env, family, theta)
    rng = np.random.default_rng(seed)
    if env.kind == "gaussian-bandit":
        return _bandit_batch(env, family, theta, 1, rng, seed)[0]
    return _grid_episode(env, family, theta, rng, seed)


def rollout_batch(env: Environment, family: PolicyFamily, theta: ParamVector, n: int,
                  seed: int) -> Sequence[Trajectory]:
    """``n`` independent episodes drawn from one generator seeded with ``seed``.

    Every trajectory records the batch seed; the batch as a whole is
    reproducible from it.
    """
    if n < 1:
        raise InvalidArgumentError("batch size must be positive")
    check_policy_shape(env, family, theta)
    rng = np.random.default_rng(seed)
    if env.kind == "gaussian-bandit":
        return _bandit_batch(env, family, theta, n, rng, seed)
    return [_grid_episode(env, family, theta, rng, seed) for _ in range(n)]


def _bandit_batch(env, family, theta, n, rng, seed) -> TrajectoryBatch:
    actions = dist.sample_batch(family, theta, n, rng)
    return TrajectoryBatch(actions, env.reward(actions), dist.score_batch(family, theta, actions),
                           seed)


def _grid_episode(env: Gridworld, family, theta, rng, seed) -> Trajectory:
    d = family.dimension
    probs = softmax(theta.values.reshape(-1, d), axis=1)
    cdfs = np.cumsum(probs, axis=1)
    cdfs[:, -1] = 1.0
    cell = env.start
    states, actions, rewards = [], [], []
    for _ in range(env.horizon):
        s = env.state_id(cell)
        a = int(np.searchsorted(cdfs[s], rng.random(), side="right"))
        cell = env.move(cell, a)
        done = cell == env.goal
        states.append(s)
        actions.append(a)
        rewards.append(env.goal_reward if done else env.step_reward)
        if done:
            break
    states = np.array(states, dtype=int)
    actions = np.array(actions, dtype=int)
    scores = np.zeros((len(states), len(theta)))
    rows = np.arange(len(states))
    for k in range(d):
        scores[rows, states * d + k] = -probs[states, k]
    scores[rows, states * d + actions] += 1.0
    return Trajectory(states, actions, np.array(rewards, dtype=float), scores, seed)


def estimate_objective(trajectories: list[Trajectory], gamma: float = 1.0) -> float:
    """Mean discounted return over the batch."""
    if not trajectories:
        raise InvalidArgumentError("need at least one trajectory")
    if isinstance(trajectories, TrajectoryBatch):
        return float(np.mean(trajectories.rewards))
    return float(np.mean([t.discounted_return(gamma) for t in trajectories]))


def reinforce_terms(trajectories: list[Trajectory], gamma: float = 1.0,
                    baseline: str = "none") -> np.ndarray:
    """Per-trajectory REINFORCE terms, shape ``(N, |theta|)``.

    Row ``i`` is ``sum_t (G_t - b) * score_t`` with ``G_t`` the discounted
    reward-to-go. Their mean is :func:`reinforce_gradient`; their spread gives
    its standard error.
    """
    if not trajectories:
        raise InvalidArgumentError("need at least one trajectory")
    if baseline not in BASELINES:
        raise InvalidArgumentError(f"unknown baseline {baseline!r}")
    b = 0.0
    if baseline == "mean-return":
        b = estimate_objective(trajectories, gamma)
    if isinstance(trajectories, TrajectoryBatch):
        return (trajectories.rewards - b)[:, None] * trajectories.scores
    dims = {t.scores.shape[1] for t in trajectories}
    if len(dims) != 1:
        raise InvalidArgumentError("trajectories have inconsistent score dimensions")
    return np.array([(t.rewards_to_go(gamma) - b) @ t.scores for t in trajectories])


def reinforce_gradient(trajectories: list[Trajectory], gamma: float = 1.0,
                       baseline: str = "none", chart: str = dist.NATURAL) -> ParamVector:
    """REINFORCE estimate of the objective gradient (reward-to-go form)."""
    return ParamVector(reinforce_terms(trajectories, gamma, baseline).mean(axis=0), chart)


def state_visit_frequencies(trajectories: list[Trajectory], n_states: int) -> np.ndarray:
    """Fraction of all visited steps spent in each state."""
    if isinstance(trajectories, TrajectoryBatch):
        return np.ones(1)
    counts = np.zeros(n_states)
    for t in trajectories:
        np.add.at(counts, t.states, 1.0)
    return counts / counts.sum()


def step_scores(trajectories) -> np.ndarray:
    """All per-step score vectors of a batch, stacked in order."""
    if isinstance(trajectories, TrajectoryBatch):
        return trajectories.scores
    return np.concatenate([t.scores for t in trajectories])
