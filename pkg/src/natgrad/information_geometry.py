"""Fisher information estimates and the local KL-Hessian check."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import distributions as dist
from .distributions import GAUSSIAN, NATURAL, ParamVector, PolicyFamily
from .errors import DomainError, InvalidArgumentError

PROVENANCES = ("analytic", "sampled", "fd-hessian")

DEFAULT_FD_STEP = 1e-4
DEFAULT_DAMPING = 1e-4


@dataclass(frozen=True)
class FisherEstimate:
    """A symmetric Fisher matrix plus where it came from.

    The matrix is symmetrized on construction. ``damping`` records the total
    multiple of the identity that has been added to the diagonal.
    """

    matrix: np.ndarray
    provenance: str = "analytic"
    sample_count: int = 0
    damping: float = 0.0

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvalidArgumentError(f"Fisher matrix must be square, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise InvalidArgumentError("Fisher matrix has non-finite entries")
        if self.provenance not in PROVENANCES:
            raise InvalidArgumentError(f"unknown provenance {self.provenance!r}")
        if self.sample_count < 0 or self.damping < 0:
            raise InvalidArgumentError("sample_count and damping must be nonnegative")
        m = 0.5 * (m + m.T)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def matvec(self, v: np.ndarray) -> np.ndarray:
        return self.matrix @ v


def fisher_from_samples(scores) -> FisherEstimate:
    """Mean outer product ``(1/N) sum s_i s_i^T`` of score vectors.

    ``scores`` is a list of :class:`ParamVector` (all in one chart) or an
    ``(N, d)`` array. The reduction runs in a single fixed order.
    """
    s = _stack_scores(scores)
    n = s.shape[0]
    return FisherEstimate(s.T @ s / n, provenance="sampled", sample_count=n)


def _stack_scores(scores) -> np.ndarray:
    if isinstance(scores, np.ndarray):
        s = np.asarray(scores, dtype=float)
        if s.ndim != 2 or s.shape[0] == 0:
            raise InvalidArgumentError("scores array must be nonempty with shape (N, d)")
        return s
    scores = list(scores)
    if not scores:
        raise InvalidArgumentError("need at least one score vector")
    charts = {getattr(v, "chart", None) for v in scores}
    if len(charts) > 1:
        raise InvalidArgumentError("score vectors come from different charts")
    lengths = {len(v) for v in scores}
    if len(lengths) > 1:
        raise InvalidArgumentError(f"score vectors have mixed lengths {sorted(lengths)}")
    return np.array([np.asarray(v, dtype=float) for v in scores])


def fisher_vector_product(scores, damping: float = 0.0) -> Callable[[np.ndarray], np.ndarray]:
    """Matrix-free ``v -> (S^T S / N + damping I) v`` for a stack of scores ``S``."""
    s = _stack_scores(scores)
    if damping < 0:
        raise InvalidArgumentError("damping must be nonnegative")
    n = s.shape[0]

    def matvec(v):
        v = np.asarray(v, dtype=float)
        return s.T @ (s @ v) / n + damping * v

    matvec.dim = s.shape[1]
    return matvec


def kl_hessian_fd(family: PolicyFamily, theta: ParamVector,
                  step: float = DEFAULT_FD_STEP) -> FisherEstimate:
    """Central-difference Hessian of ``d -> KL(pi_theta || pi_{theta+d})`` at ``d = 0``."""
    if not step > 0:
        raise InvalidArgumentError("step must be positive")
    base = theta.values
    if family.kind == GAUSSIAN and family.chart == NATURAL and not base[1] > 2 * step:
        raise DomainError(f"sigma={base[1]} too small for finite-difference step {step}")
    dist.kl_closed_form(family, theta, theta)  # validates theta

    def f(delta):
        return dist.kl_closed_form(family, theta, ParamVector(base + delta, theta.chart))

    d = len(base)
    eye = np.eye(d) * step
    h = np.empty((d, d))
    f0 = f(np.zeros(d))
    for i in range(d):
        h[i, i] = (f(eye[i]) - 2.0 * f0 + f(-eye[i])) / step**2
        for j in range(i + 1, d):
            h[i, j] = h[j, i] = (
                f(eye[i] + eye[j]) - f(eye[i] - eye[j])
                - f(-eye[i] + eye[j]) + f(-eye[i] - eye[j])
            ) / (4.0 * step**2)
    return FisherEstimate(h, provenance="fd-hessian")


def damp(estimate: FisherEstimate, lambda_damp: float = DEFAULT_DAMPING) -> FisherEstimate:
    """Add ``lambda_damp * I``; the damping field accumulates."""
    if lambda_damp < 0:
        raise InvalidArgumentError(f"damping must be nonnegative, got {lambda_damp}")
    if lambda_damp == 0:
        return estimate
    return FisherEstimate(
        estimate.matrix + lambda_damp * np.eye(estimate.dim),
        provenance=estimate.provenance,
        sample_count=estimate.sample_count,
        damping=estimate.damping + lambda_damp,
    )


def monte_carlo_kl(family: PolicyFamily, theta_a: ParamVector, theta_b: ParamVector,
                   n: int, seed: int) -> float:
    """Sample estimate of ``KL(pi_a || pi_b)``: mean log-ratio over ``x ~ pi_a``."""
    if n <= 0:
        raise InvalidArgumentError("n must be positive")
    dist.kl_closed_form(family, theta_a, theta_b)  # same validation as the exact KL
    xs = dist.sample_batch(family, theta_a, n, np.random.default_rng(seed))
    return float(np.mean(_log_prob_batch(family, theta_a, xs) - _log_prob_batch(family, theta_b, xs)))


def _log_prob_batch(family: PolicyFamily, theta: ParamVector, xs) -> np.ndarray:
    if family.kind == GAUSSIAN:
        mu, sigma = dist.gaussian_mu_sigma(family, theta)
        z = (xs - mu) / sigma
        return -0.5 * z * z - np.log(sigma) - 0.5 * np.log(2.0 * np.pi)
    logits = theta.values
    return logits[xs] - np.logaddexp.reduce(logits)

