"""Solvers for ``F x = g``: dense Cholesky and matrix-free conjugate gradient."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import cho_solve
from scipy.linalg.lapack import dpotrf

from .errors import InvalidArgumentError, NumericalBreakdownError, SingularMatrixError

ASYMMETRY_TOL = 1e-8
DIRECT_MAX_DIM = 512


@dataclass(frozen=True)
class SolveReport:
    solution: np.ndarray
    iterations: int
    residual_norm: float
    method: str
    converged: bool = True


def _as_matrix(matrix) -> np.ndarray:
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidArgumentError(f"expected a square matrix, got shape {a.shape}")
    asym = np.max(np.abs(a - a.T)) if a.size else 0.0
    if asym > ASYMMETRY_TOL:
        raise InvalidArgumentError(f"matrix is not symmetric (max |A - A^T| = {asym:.3g})")
    # tiny asymmetries are rounding noise; average them away
    return 0.5 * (a + a.T)


def _as_rhs(rhs, n: int) -> np.ndarray:
    b = np.asarray(rhs, dtype=float).reshape(-1)
    if b.shape[0] != n:
        raise InvalidArgumentError(f"rhs has length {b.shape[0]}, expected {n}")
    return b


def solve_spd(matrix, rhs) -> SolveReport:
    """Solve a symmetric positive definite system by Cholesky factorization.

    Raises :class:`SingularMatrixError` naming the (0-based) pivot where the
    factorization broke down. No damping is applied here; callers that hit a
    singular system are expected to damp and retry.
    """
    a = _as_matrix(matrix)
    b = _as_rhs(rhs, a.shape[0])
    c, info = dpotrf(a, lower=False, clean=True)
    if info > 0:
        raise SingularMatrixError(info - 1)
    if info < 0:
        raise InvalidArgumentError(f"LAPACK dpotrf rejected argument {-info}")
    x = cho_solve((c, False), b)
    return SolveReport(x, 1, float(np.linalg.norm(a @ x - b)), "direct")


def conjugate_gradient(matvec, rhs, tol: float = 1e-10, max_iter: int | None = None) -> SolveReport:
    """Unpreconditioned conjugate gradient for a symmetric PSD operator.

    Stops once ``||A x - b|| <= tol * ||b||``. If ``max_iter`` is reached first,
    the iterate with the smallest residual is returned with ``converged=False``.

    ``matvec`` is either a callable ``v -> A v`` or a dense matrix.
    """
    if not tol > 0:
        raise InvalidArgumentError("tol must be positive")
    b = np.asarray(rhs, dtype=float).reshape(-1)
    n = b.shape[0]
    if callable(matvec):
        apply: Callable[[np.ndarray], np.ndarray] = matvec
    else:
        a = _as_matrix(matvec)
        _as_rhs(b, a.shape[0])
        apply = a.__matmul__
    if max_iter is None:
        max_iter = 10 * max(n, 1)

    x = np.zeros(n)
    r = b.copy()
    p = r.copy()
    rr = r @ r
    target = tol * np.sqrt(rr)
    best_x, best_res = x.copy(), np.sqrt(rr)
    it = 0
    while np.sqrt(rr) > target and it < max_iter:
        ap = np.asarray(apply(p), dtype=float)
        pap = p @ ap
        if not np.isfinite(pap):
            raise NumericalBreakdownError(f"non-finite curvature p^T A p at iteration {it}")
        if pap <= 0:
            # null or negative curvature direction: no further progress possible
            break
        step = rr / pap
        x = x + step * p
        r = r - step * ap
        it += 1
        rr_new = r @ r
        if not np.isfinite(rr_new):
            raise NumericalBreakdownError(f"non-finite residual at iteration {it}")
        if np.sqrt(rr_new) < best_res:
            best_x, best_res = x.copy(), np.sqrt(rr_new)
        p = r + (rr_new / rr) * p
        rr = rr_new

    # recompute the residual rather than trusting the recurrence
    res = float(np.linalg.norm(np.asarray(apply(best_x)) - b))
    return SolveReport(best_x, it, res, "cg", converged=res <= target or res == 0.0)


def solve(fisher, rhs, method: str = "auto", tol: float = 1e-10,
          max_iter: int | None = None) -> SolveReport:
    """Dispatch to :func:`solve_spd` or :func:`conjugate_gradient`.

    ``method="auto"`` uses the dense solver up to ``DIRECT_MAX_DIM`` unknowns
    and CG above. Callables always go to CG.
    """
    if callable(fisher) and not isinstance(fisher, np.ndarray):
        if method == "direct":
            raise InvalidArgumentError("direct solve needs an explicit matrix")
        return conjugate_gradient(fisher, rhs, tol, max_iter)
    a = np.asarray(fisher, dtype=float)
    if method == "auto":
        method = "direct" if a.shape[0] <= DIRECT_MAX_DIM else "cg"
    if method == "direct":
        return solve_spd(a, rhs)
    if method == "cg":
        return conjugate_gradient(a, rhs, tol, max_iter)
    raise InvalidArgumentError(f"unknown solver {method!r}")
