"""SDNA on least squares read as an iterative Hessian sketch.

With quadratic loss, the primal iterate produced by an SDNA step on subset S
is the minimizer of a sketched least-squares objective: only the rows of
``A^T w - b`` selected by S enter the data term, and a linear correction built
from the current dual variables keeps the sketch unbiased. This module solves
that sketched problem directly through its d x d normal equations and checks
it against ``erm.sdna_step``.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np
import scipy.linalg

from .erm import DualState, ErmProblem, sdna_step
from .linalg import as_subset
from .sampling import SamplingSpec, draw

MAX_DENSE_D = 512


def _check_quadratic(problem: ErmProblem):
    if problem.loss.name != "quadratic":
        raise ValueError("the sketch view applies to quadratic loss only")


def selector(S, n: int) -> np.ndarray:
    """The n x |S| block of the identity with columns S."""
    S = as_subset(S, n)
    out = np.zeros((n, S.size))
    out[S, np.arange(S.size)] = 1.0
    return out


def least_squares_optimum(problem: ErmProblem):
    """``(w*, alpha*)`` from the dense dual normal equations ``(I + A^T A/(lam n)) alpha = b``."""
    _check_quadratic(problem)
    n, ln = problem.n, problem.lam * problem.n
    H = np.eye(n) + problem.gram() / ln
    alpha = scipy.linalg.solve(H, problem.b, assume_a="pos")
    return problem.A @ alpha / ln, alpha


def primal_stationarity(problem: ErmProblem, w) -> float:
    """Norm of ``grad P(w) = A (A^T w - b)/n + lam w``."""
    r = problem.At @ w - problem.b
    return float(np.linalg.norm(problem.A @ r / problem.n + problem.lam * w))


def ihs_update(problem: ErmProblem, w_k, alpha_k, S, n_scale: float | None = None) -> np.ndarray:
    """Minimize the sketched objective on S.

    ``(1/2n)|S^T (A^T w - b)|^2 + (lam/2)|w|^2 + <w, (1/n) A I_S alpha_k - lam w_k>``,
    whose normal equations are ``(A_S A_S^T / n + lam I) w = A_S (b_S - alpha_S)/n + lam w_k``.
    ``n_scale`` replaces the ``1/n`` factor and exists only for fault-injection tests.
    """
    _check_quadratic(problem)
    if problem.d > MAX_DENSE_D:
        raise ValueError(f"dense sketch solve limited to d <= {MAX_DENSE_D}")
    S = as_subset(S, problem.n)
    inv_n = 1.0 / problem.n if n_scale is None else n_scale
    AS = problem.A[:, S]
    lhs = inv_n * (AS @ AS.T) + problem.lam * np.eye(problem.d)
    rhs = inv_n * (AS @ (problem.b[S] - np.asarray(alpha_k)[S])) + problem.lam * np.asarray(w_k)
    return scipy.linalg.solve(lhs, rhs, assume_a="pos")


@dataclass
class IhsReport:
    steps: int
    max_discrepancy: float
    passed: bool
    first_failure_step: int | None = None

    def to_json(self) -> dict:
        out = asdict(self)
        out["pass"] = out.pop("passed")
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def verify_ihs_equivalence(problem: ErmProblem, spec: SamplingSpec, steps: int, rng,
                           tol: float = 1e-8, fault: bool = False) -> IhsReport:
    """Run SDNA and the sketch update in lockstep on identical draws.

    The sketch path carries its own primal iterate and reads only SDNA's dual
    variables, so any per-step mismatch accumulates into the reported
    discrepancy. ``fault=True`` corrupts the ``1/n`` factor of the sketch.
    """
    _check_quadratic(problem)
    state = DualState.zeros(problem)
    w_ihs = state.w.copy()
    worst, first = 0.0, None
    n_scale = 1.0 / (problem.n + 1) if fault else None
    for k in range(1, steps + 1):
        S = draw(spec, rng)
        w_ihs = ihs_update(problem, w_ihs, state.alpha, S, n_scale=n_scale)
        state = sdna_step(problem, state, S)
        gap = float(np.max(np.abs(w_ihs - state.w)))
        worst = max(worst, gap)
        if first is None and gap > tol:
            first = k
    return IhsReport(steps, worst, first is None, first)
