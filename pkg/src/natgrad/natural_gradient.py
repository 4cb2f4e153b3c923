"""Natural-gradient direction, KL-budgeted step size, and the two update rules.

The natural update is

    theta_new = theta + alpha * F^{-1} g,    alpha = sqrt(2 eps / (g^T F^{-1} g))

so that the second-order estimate of ``KL(pi_theta || pi_theta_new)`` equals
``eps`` whatever the gradient's scale or the chart the parameters live in.
Everything here maximizes the objective: positive ``alpha`` ascends.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import distributions as dist
from .distributions import GAUSSIAN, NATURAL, ParamVector, PolicyFamily
from .errors import (
    BacktrackingError,
    ChartViolationError,
    DegenerateGradientError,
    DomainError,
    InvalidArgumentError,
)
from .information_geometry import FisherEstimate
from .linear_solver import SolveReport, solve

DEGENERATE_TOL = 1e-12
BACKTRACK_SHRINK = 0.5
BACKTRACK_KL_FACTOR = 1.5
BACKTRACK_MAX = 10


@dataclass(frozen=True)
class UpdateReport:
    theta_old: ParamVector
    theta_new: ParamVector
    gradient: ParamVector
    natural_gradient: ParamVector
    alpha: float
    epsilon: float
    predicted_kl: float
    realized_kl: float | None
    quadratic_form: float
    backtrack_count: int
    solve: SolveReport | None = None

    @property
    def alpha_effective(self) -> float:
        return self.alpha * BACKTRACK_SHRINK**self.backtrack_count


def _vec(v) -> np.ndarray:
    return np.asarray(v.values if isinstance(v, ParamVector) else v, dtype=float)


def natural_direction(gradient: ParamVector, fisher, solver_choice: str = "auto",
                      tol: float = 1e-10, max_iter: int | None = None):
    """Solve ``F x = g`` for the natural gradient ``x``; ``F^{-1}`` is never formed.

    ``fisher`` is a :class:`FisherEstimate`, a dense matrix, or a matrix-free
    callable ``v -> F v`` (which always goes through conjugate gradient).
    Returns ``(natural_gradient, SolveReport)``.
    """
    g = _vec(gradient)
    op = fisher.matrix if isinstance(fisher, FisherEstimate) else fisher
    if not callable(op):
        op = np.asarray(op, dtype=float)
        if op.shape != (g.shape[0], g.shape[0]):
            raise InvalidArgumentError(f"Fisher shape {op.shape} does not match gradient {g.shape}")
    report = solve(op, g, method=solver_choice, tol=tol, max_iter=max_iter)
    chart = gradient.chart if isinstance(gradient, ParamVector) else NATURAL
    return ParamVector(report.solution, chart), report


def quadratic_form(gradient, natural_gradient) -> float:
    """``g^T F^{-1} g`` computed as ``g . natural_gradient``."""
    return float(_vec(gradient) @ _vec(natural_gradient))


def dynamic_step_size(gradient, natural_gradient, epsilon: float) -> float:
    """``alpha = sqrt(2 eps / (g . F^{-1} g))``."""
    if not epsilon > 0:
        raise InvalidArgumentError(f"KL budget epsilon must be positive, got {epsilon}")
    q = quadratic_form(gradient, natural_gradient)
    if not q > DEGENERATE_TOL:
        raise DegenerateGradientError(
            f"gradient quadratic form {q:.3g} is at or below {DEGENERATE_TOL:g}"
        )
    return float(np.sqrt(2.0 * epsilon / q))


def _realized_kl(family, theta_old, theta_new, state_weights):
    if len(theta_old) == family.dimension and state_weights is None:
        return dist.kl_closed_form(family, theta_old, theta_new)
    return dist.tabular_kl(family, theta_old, theta_new, state_weights)


def _check_valid(family, theta: ParamVector) -> None:
    for s in range(dist.n_blocks(family, theta)):
        try:
            dist.kl_closed_form(family, dist.state_block(family, theta, s),
                                dist.state_block(family, theta, s))
        except DomainError as exc:
            raise ChartViolationError(str(exc)) from None


def npg_update(family: PolicyFamily, theta: ParamVector, gradient: ParamVector, fisher,
               epsilon: float, audit: bool = True, *, backtracking: bool = False,
               solver_choice: str = "auto", state_weights=None) -> UpdateReport:
    """One natural policy gradient step of KL size ``epsilon``.

    With ``audit`` the exact KL between old and new policy is reported.
    With ``backtracking`` the step is halved (at most ``BACKTRACK_MAX`` times)
    until the new parameters are valid and the exact KL is at most
    ``BACKTRACK_KL_FACTOR * epsilon``.

    For tabular policies (``theta`` holds one block per state) the KL is the
    ``state_weights``-weighted mean of per-state divergences, which should
    match the weighting the Fisher was built with.
    """
    if not epsilon > 0:
        raise InvalidArgumentError(f"KL budget epsilon must be positive, got {epsilon}")
    if gradient.chart != theta.chart or len(gradient) != len(theta):
        raise InvalidArgumentError("gradient and theta disagree in chart or length")
    _check_valid(family, theta)
    nat, report = natural_direction(gradient, fisher, solver_choice)
    alpha = dynamic_step_size(gradient, nat, epsilon)
    q = quadratic_form(gradient, nat)

    step = alpha * nat.values
    count = 0
    while True:
        try:
            theta_new = ParamVector(theta.values + step, theta.chart)
            _check_valid(family, theta_new)
            ok = True
        except ChartViolationError:
            if not backtracking:
                raise
            ok = False
        realized = None
        if ok and (audit or backtracking):
            realized = _realized_kl(family, theta, theta_new, state_weights)
        if not backtracking or (ok and realized <= BACKTRACK_KL_FACTOR * epsilon):
            break
        if count == BACKTRACK_MAX:
            raise BacktrackingError(
                f"KL budget still exceeded after {BACKTRACK_MAX} halvings"
            )
        step = step * BACKTRACK_SHRINK
        count += 1

    return UpdateReport(
        theta_old=theta,
        theta_new=theta_new,
        gradient=gradient,
        natural_gradient=nat,
        alpha=alpha,
        epsilon=epsilon,
        predicted_kl=epsilon,
        realized_kl=realized if audit or backtracking else None,
        quadratic_form=q,
        backtrack_count=count,
        solve=report,
    )


def vanilla_update(theta: ParamVector, gradient: ParamVector, alpha: float,
                   family: PolicyFamily | None = None) -> ParamVector:
    """``theta + alpha * gradient``.

    If ``family`` is omitted a 2-vector in the natural chart is treated as a
    Gaussian ``(mu, sigma)`` for the positivity check.
    """
    if not alpha > 0:
        raise InvalidArgumentError(f"step size alpha must be positive, got {alpha}")
    if gradient.chart != theta.chart or len(gradient) != len(theta):
        raise InvalidArgumentError("gradient and theta disagree in chart or length")
    new = ParamVector(theta.values + alpha * gradient.values, theta.chart)
    if family is None and theta.chart == NATURAL and len(theta) == 2:
        family = dist.gaussian_family()
    if family is not None and family.kind == GAUSSIAN:
        _check_valid(family, new)
    return new


@dataclass(frozen=True)
class DistanceRecord:
    euclidean: float
    kl_ab: float
    kl_ba: float


def euclidean_vs_kl_diagnostic(family: PolicyFamily, theta_a: ParamVector,
                               theta_b: ParamVector) -> DistanceRecord:
    """Parameter-space distance next to both KL directions."""
    kl_ab = dist.kl_closed_form(family, theta_a, theta_b)
    kl_ba = dist.kl_closed_form(family, theta_b, theta_a)
    return DistanceRecord(float(np.linalg.norm(theta_a.values - theta_b.values)), kl_ab, kl_ba)


def chart_gap(theta: ParamVector, gradient: ParamVector, epsilon: float,
              method: str = "npg") -> float:
    """KL between the results of one update taken in the natural and log-scale charts.

    ``theta`` and ``gradient`` are a Gaussian point and objective gradient in
    the natural chart. The gradient is pulled back to the log-scale chart by
    the chain rule, one update is taken in each chart, and the log-scale
    result is mapped back before comparing. For ``method="vanilla"`` the step
    size is ``sqrt(epsilon)``, matching the parameter-space scale of an
    ``epsilon``-sized natural step.
    """
    nat_fam = dist.gaussian_family(dist.NATURAL)
    log_fam = dist.gaussian_family(dist.LOG_SCALE)
    theta_log = dist.reparameterize(nat_fam, theta, dist.LOG_SCALE)
    sigma = theta.values[1]
    grad_log = ParamVector(gradient.values * np.array([1.0, sigma]), dist.LOG_SCALE)

    if method == "npg":
        a = npg_update(nat_fam, theta, gradient, dist.fisher_analytic(nat_fam, theta),
                       epsilon, audit=False).theta_new
        b = npg_update(log_fam, theta_log, grad_log, dist.fisher_analytic(log_fam, theta_log),
                       epsilon, audit=False).theta_new
    elif method == "vanilla":
        step = float(np.sqrt(epsilon))
        a = vanilla_update(theta, gradient, step, nat_fam)
        b = vanilla_update(theta_log, grad_log, step, log_fam)
    else:
        raise InvalidArgumentError(f"unknown method {method!r}")
    return dist.kl_closed_form(nat_fam, a, dist.reparameterize(log_fam, b, dist.NATURAL))
