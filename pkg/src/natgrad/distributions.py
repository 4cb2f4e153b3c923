"""Parametric policy families.

Two families are supported:

* ``gaussian-diag`` -- a 1-D normal over a real action, parameters ``(mu, sigma)``
  in the ``natural`` chart or ``(mu, log sigma)`` in the ``log-scale`` chart.
* ``categorical-softmax`` -- a distribution over ``K`` indices given by
  softmax logits. Only the ``natural`` (logit) chart exists.

Every function here is pure. Divergences are in nats.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, softmax

from .errors import DomainError, InvalidArgumentError

GAUSSIAN = "gaussian-diag"
CATEGORICAL = "categorical-softmax"
NATURAL = "natural"
LOG_SCALE = "log-scale"

KINDS = (GAUSSIAN, CATEGORICAL)
CHARTS = (NATURAL, LOG_SCALE)

_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)


@dataclass(frozen=True)
class PolicyFamily:
    """A family of distributions together with the chart its parameters live in.

    ``dimension`` is the number of parameters per decision point: 2 for the
    Gaussian, ``K`` for a ``K``-way categorical.
    """

    kind: str
    dimension: int
    chart: str = NATURAL

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgumentError(f"unknown family kind {self.kind!r}")
        if self.chart not in CHARTS:
            raise InvalidArgumentError(f"unknown chart {self.chart!r}")
        if self.kind == GAUSSIAN and self.dimension != 2:
            raise InvalidArgumentError("gaussian-diag has exactly 2 parameters (mu, sigma)")
        if self.kind == CATEGORICAL:
            if self.dimension < 2:
                raise InvalidArgumentError("categorical-softmax needs at least 2 categories")
            if self.chart != NATURAL:
                raise InvalidArgumentError("categorical-softmax only has the natural (logit) chart")

    def with_chart(self, chart: str) -> PolicyFamily:
        return PolicyFamily(self.kind, self.dimension, chart)


def gaussian_family(chart: str = NATURAL) -> PolicyFamily:
    return PolicyFamily(GAUSSIAN, 2, chart)


def categorical_family(k: int) -> PolicyFamily:
    return PolicyFamily(CATEGORICAL, k, NATURAL)


@dataclass(frozen=True)
class ParamVector:
    """Flat, read-only vector of policy parameters tagged with its chart."""

    values: np.ndarray
    chart: str = NATURAL

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if not np.all(np.isfinite(v)):
            raise InvalidArgumentError("parameter vector has non-finite entries")
        if self.chart not in CHARTS:
            raise InvalidArgumentError(f"unknown chart {self.chart!r}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, ParamVector):
            return NotImplemented
        return self.chart == other.chart and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash((self.chart, self.values.tobytes()))

    def __repr__(self):
        return f"ParamVector({self.values.tolist()}, chart={self.chart!r})"


def params(values, chart: str = NATURAL) -> ParamVector:
    return ParamVector(np.asarray(values, dtype=float), chart)


def _check(family: PolicyFamily, theta: ParamVector) -> None:
    if not isinstance(theta, ParamVector):
        raise InvalidArgumentError("theta must be a ParamVector")
    if theta.chart != family.chart:
        raise InvalidArgumentError(
            f"chart mismatch: family uses {family.chart!r}, theta is {theta.chart!r}"
        )
    if len(theta) != family.dimension:
        raise InvalidArgumentError(
            f"theta has {len(theta)} entries, family expects {family.dimension}"
        )
    if family.kind == GAUSSIAN and family.chart == NATURAL and not theta.values[1] > 0:
        raise DomainError(f"sigma must be > 0 in the natural chart, got {theta.values[1]}")


def gaussian_mu_sigma(family: PolicyFamily, theta: ParamVector) -> tuple[float, float]:
    """Return ``(mu, sigma)`` regardless of chart."""
    _check(family, theta)
    mu, s = theta.values
    return float(mu), float(np.exp(s)) if family.chart == LOG_SCALE else float(s)


def softmax_probs(theta: ParamVector) -> np.ndarray:
    return softmax(theta.values)


def _category(family: PolicyFamily, x) -> int:
    i = int(x)
    if i != x or not 0 <= i < family.dimension:
        raise InvalidArgumentError(f"category index {x!r} out of range for K={family.dimension}")
    return i


def log_prob(family: PolicyFamily, theta: ParamVector, x) -> float:
    """Log-density (Gaussian) or log-mass (categorical) of ``x`` under ``theta``."""
    _check(family, theta)
    if family.kind == GAUSSIAN:
        mu, sigma = gaussian_mu_sigma(family, theta)
        z = (x - mu) / sigma
        return float(-0.5 * z * z - np.log(sigma) - _HALF_LOG_2PI)
    logits = theta.values
    return float(logits[_category(family, x)] - logsumexp(logits))


def score(family: PolicyFamily, theta: ParamVector, x) -> ParamVector:
    """Gradient of :func:`log_prob` with respect to ``theta``, in theta's chart."""
    return ParamVector(score_batch(family, theta, np.atleast_1d(x))[0], theta.chart)


def score_batch(family: PolicyFamily, theta: ParamVector, xs) -> np.ndarray:
    """Scores for many actions at once, shape ``(n, dimension)``."""
    _check(family, theta)
    xs = np.asarray(xs)
    if family.kind == GAUSSIAN:
        mu, sigma = gaussian_mu_sigma(family, theta)
        d = xs.astype(float) - mu
        var = sigma * sigma
        out = np.empty((d.shape[0], 2))
        out[:, 0] = d / var
        if family.chart == NATURAL:
            out[:, 1] = (d * d - var) / (var * sigma)
        else:
            out[:, 1] = (d * d - var) / var
        return out
    idx = xs.astype(int)
    if np.any(idx != xs) or np.any(idx < 0) or np.any(idx >= family.dimension):
        raise InvalidArgumentError("category index out of range")
    out = -np.tile(softmax_probs(theta), (idx.shape[0], 1))
    out[np.arange(idx.shape[0]), idx] += 1.0
    return out


def sample(family: PolicyFamily, theta: ParamVector, seed: int):
    """Draw one action; deterministic in ``seed``."""
    return sample_batch(family, theta, 1, np.random.default_rng(seed))[0]


def sample_batch(family: PolicyFamily, theta: ParamVector, n: int, rng: np.random.Generator):
    """Draw ``n`` actions from ``rng``. Categorical draws are ints, Gaussian draws floats."""
    _check(family, theta)
    if family.kind == GAUSSIAN:
        mu, sigma = gaussian_mu_sigma(family, theta)
        return mu + sigma * rng.standard_normal(n)
    p = softmax_probs(theta)
    # inverse-CDF keeps one uniform per draw, so streams line up across calls
    cdf = np.cumsum(p)
    cdf[-1] = 1.0
    return np.searchsorted(cdf, rng.random(n), side="right").astype(int)


def _half_r_minus_1_minus_log_r(r: float) -> float:
    # (r - 1 - ln r) / 2 without cancellation near r = 1
    u = r - 1.0
    return 0.5 * (u - np.log1p(u))


def kl_closed_form(family: PolicyFamily, theta_a: ParamVector, theta_b: ParamVector) -> float:
    """Exact ``KL(pi_a || pi_b)`` in nats."""
    _check(family, theta_a)
    _check(family, theta_b)
    if family.kind == GAUSSIAN:
        mu_a, s_a = gaussian_mu_sigma(family, theta_a)
        mu_b, s_b = gaussian_mu_sigma(family, theta_b)
        r = (s_a / s_b) ** 2
        kl = _half_r_minus_1_minus_log_r(r) + (mu_a - mu_b) ** 2 / (2.0 * s_b * s_b)
        return float(max(kl, 0.0))
    la = theta_a.values - logsumexp(theta_a.values)
    lb = theta_b.values - logsumexp(theta_b.values)
    pa = np.exp(la)
    return float(max(np.sum(pa * (la - lb)), 0.0))


def fisher_matrix(family: PolicyFamily, theta: ParamVector) -> np.ndarray:
    """Exact Fisher information matrix in theta's chart."""
    _check(family, theta)
    if family.kind == GAUSSIAN:
        _, sigma = gaussian_mu_sigma(family, theta)
        var = sigma * sigma
        if family.chart == NATURAL:
            return np.diag([1.0 / var, 2.0 / var])
        return np.diag([1.0 / var, 2.0])
    p = softmax_probs(theta)
    return np.diag(p) - np.outer(p, p)


def fisher_analytic(family: PolicyFamily, theta: ParamVector):
    """Exact Fisher wrapped as a :class:`~natgrad.information_geometry.FisherEstimate`."""
    from .information_geometry import FisherEstimate

    return FisherEstimate(fisher_matrix(family, theta), provenance="analytic")


def reparameterize(family: PolicyFamily, theta: ParamVector, target_chart: str) -> ParamVector:
    """Express the same distribution in ``target_chart``."""
    if target_chart not in CHARTS:
        raise InvalidArgumentError(f"unknown chart {target_chart!r}")
    _check(family, theta)
    if target_chart == family.chart:
        return theta
    if family.kind != GAUSSIAN:
        raise InvalidArgumentError("categorical-softmax has no log-scale chart")
    mu, s = theta.values
    if target_chart == LOG_SCALE:
        return ParamVector(np.array([mu, np.log(s)]), LOG_SCALE)
    return ParamVector(np.array([mu, np.exp(s)]), NATURAL)


# Tabular policies: one block of ``family.dimension`` parameters per state.


def state_block(family: PolicyFamily, theta: ParamVector, state: int) -> ParamVector:
    d = family.dimension
    return ParamVector(theta.values[state * d:(state + 1) * d], theta.chart)


def n_blocks(family: PolicyFamily, theta: ParamVector) -> int:
    n, rem = divmod(len(theta), family.dimension)
    if rem or n == 0:
        raise InvalidArgumentError(
            f"parameter length {len(theta)} is not a multiple of {family.dimension}"
        )
    return n


def tabular_kl(family: PolicyFamily, theta_a: ParamVector, theta_b: ParamVector,
               state_weights=None) -> float:
    """Weighted mean of per-state KL divergences for a tabular policy.

    ``state_weights`` defaults to uniform and is normalized to sum to one.
    """
    n = n_blocks(family, theta_a)
    if len(theta_b) != len(theta_a):
        raise InvalidArgumentError("parameter vectors differ in length")
    w = np.full(n, 1.0 / n) if state_weights is None else np.asarray(state_weights, float)
    if w.shape != (n,) or np.any(w < 0) or w.sum() <= 0:
        raise InvalidArgumentError("state_weights must be nonnegative with one entry per state")
    w = w / w.sum()
    total = 0.0
    for s in np.flatnonzero(w):
        total += w[s] * kl_closed_form(family, state_block(family, theta_a, s),
                                       state_block(family, theta_b, s))
    return float(total)


def tabular_fisher(family: PolicyFamily, theta: ParamVector, state_weights) -> np.ndarray:
    """Block-diagonal Fisher with per-state blocks scaled by normalized ``state_weights``."""
    n = n_blocks(family, theta)
    d = family.dimension
    w = np.asarray(state_weights, float)
    if w.shape != (n,) or np.any(w < 0) or w.sum() <= 0:
        raise InvalidArgumentError("state_weights must be nonnegative with one entry per state")
    w = w / w.sum()
    out = np.zeros((n * d, n * d))
    for s in np.flatnonzero(w):
        out[s * d:(s + 1) * d, s * d:(s + 1) * d] = w[s] * fisher_matrix(
            family, state_block(family, theta, s))
    return out


def is_valid(family: PolicyFamily, theta: ParamVector) -> bool:
    try:
        for s in range(n_blocks(family, theta)):
            _check(family, state_block(family, theta, s))
    except (DomainError, InvalidArgumentError):
        return False
    return True


__all__ = [
    "PolicyFamily", "ParamVector", "params", "gaussian_family", "categorical_family",
    "log_prob", "score", "score_batch", "sample", "sample_batch", "kl_closed_form",
    "fisher_matrix", "fisher_analytic", "reparameterize", "gaussian_mu_sigma",
    "softmax_probs", "state_block", "n_blocks", "tabular_kl", "tabular_fisher", "is_valid",
    "GAUSSIAN", "CATEGORICAL", "NATURAL", "LOG_SCALE",
]
