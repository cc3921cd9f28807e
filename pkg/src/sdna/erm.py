"""L2-regularized empirical risk minimization through its dual.

Primal ``P(w) = (1/n) sum_i phi_i(a_i^T w) + (lam/2) |w|^2`` and dual
``D(alpha) = (1/n) sum_i -phi_i*(-alpha_i) - (lam/2) |A alpha / (lam n)|^2``.
Both solvers keep ``alpha_bar = A alpha / (lam n)``, which equals the primal
iterate ``w`` for this regularizer.

SDNA maximizes D exactly over the sampled coordinates, using the full Gram
block ``X_S`` with ``X = A^T A / (lam n)``. Minibatch SDCA solves one scalar
problem per sampled coordinate with curvature ``v_i / (lam n)``, where ``v``
satisfies ``E[(A^T A)_S] <= D(p) D(v)``.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .composite import conjugate_loss_term
from .errors import (
    FactorizationError,
    InnerSolverError,
    InvariantViolation,
    UnsupportedSamplingError,
)
from .linalg import as_subset, largest_eigenvalue
from .losses import get_loss
from .sampling import SamplingSpec, draw_many, eso_vector, probability_vector
from .smooth import QuadraticObjective
from .trace import TraceRecord

log = logging.getLogger(__name__)

DRIFT_TOL = 1e-9
ASCENT_TOL = 1e-10
GRAM_PRECOMPUTE_MAX_N = 4096


@dataclass
class ErmProblem:
    """Data ``A`` (d x n, one example per column), labels ``b``, loss and ``lam``."""

    A: np.ndarray
    b: np.ndarray
    loss: object = "quadratic"
    lam: float = None
    _gram: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.A = np.asfortranarray(np.asarray(self.A, dtype=float))
        if self.A.ndim != 2:
            raise ValueError("A must be a d x n matrix")
        self.b = np.ascontiguousarray(self.b, dtype=float)
        if self.b.shape != (self.A.shape[1],):
            raise ValueError(f"need one label per column of A: {self.b.shape} vs n={self.A.shape[1]}")
        self.loss = get_loss(self.loss)
        self.loss.check_labels(self.b)
        if self.lam is None:
            self.lam = 1.0 / self.n
        if not self.lam > 0:
            raise ValueError("lambda must be positive")

    @property
    def d(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def gamma(self) -> float:
        return self.loss.gamma

    @property
    def At(self) -> np.ndarray:
        """Examples as rows, C-contiguous (a view of the column-major ``A``)."""
        return self.A.T

    def gram(self) -> np.ndarray:
        """``A^T A``, computed once."""
        if self._gram is None:
            self._gram = np.ascontiguousarray(self.At @ self.A)
        return self._gram

    def gram_block(self, S) -> np.ndarray:
        """``X_S`` block of ``X = A^T A / (lam n)`` in compacted coordinates."""
        cols = self.A[:, S]
        return cols.T @ cols / (self.lam * self.n)


@dataclass
class DualState:
    alpha: np.ndarray
    alpha_bar: np.ndarray

    @property
    def w(self) -> np.ndarray:
        return self.alpha_bar

    @classmethod
    def zeros(cls, problem: ErmProblem) -> "DualState":
        return cls(np.zeros(problem.n), np.zeros(problem.d))

    @classmethod
    def from_alpha(cls, problem: ErmProblem, alpha) -> "DualState":
        alpha = np.array(alpha, dtype=float)
        return cls(alpha, problem.A @ alpha / (problem.lam * problem.n))

    def copy(self) -> "DualState":
        return DualState(self.alpha.copy(), self.alpha_bar.copy())

    def drift(self, problem: ErmProblem) -> float:
        return float(np.max(np.abs(self.alpha_bar - problem.A @ self.alpha / (problem.lam * problem.n)),
                            initial=0.0))


def primal_value(problem: ErmProblem, w) -> float:
    w = np.asarray(w, dtype=float)
    margins = problem.At @ w
    return float(np.mean(problem.loss.value(margins, problem.b)) + 0.5 * problem.lam * w @ w)


def dual_value(problem: ErmProblem, alpha) -> float:
    alpha = np.asarray(alpha, dtype=float)
    s = problem.A @ alpha / (problem.lam * problem.n)
    return float(-np.mean(problem.loss.conjugate(-alpha, problem.b)) - 0.5 * problem.lam * s @ s)


def duality_gap(problem: ErmProblem, state: DualState) -> float:
    return primal_value(problem, state.w) - dual_value(problem, state.alpha)


def _one_subset(problem, S):
    S = as_subset(S, problem.n)
    return S, np.array([0, S.size], dtype=np.int64)


def _raise_kernel_failure(status, problem, state, S):
    if status == _kernels.FACTORIZATION_FAILED:
        raise FactorizationError(S, "SDNA block (X_S + I) is not positive definite")
    raise InnerSolverError(
        f"inner Newton did not reach gradient norm {_kernels.NEWTON_TOL} on subset {S.tolist()}",
        subset=S.tolist(),
        alpha=state.alpha[S].tolist(),
        labels=problem.b[S].tolist(),
        margins=(problem.At[S] @ state.w).tolist(),
        gram=problem.gram_block(S).tolist(),
    )


def _gram_arg(problem, gram):
    if gram == "lazy":
        return np.empty((0, 0))
    if gram == "precomputed":
        if problem.n > GRAM_PRECOMPUTE_MAX_N:
            raise ValueError(f"refusing to precompute a {problem.n} x {problem.n} Gram matrix")
        return problem.gram()
    raise ValueError(f"unknown gram strategy {gram!r}")


def sdna_step(problem: ErmProblem, state: DualState, S, gram: str = "lazy") -> DualState:
    """Maximize D exactly over the coordinates in ``S``; returns the new state."""
    S, offsets = _one_subset(problem, S)
    new = state.copy()
    status, _ = _kernels.sdna_steps(problem.At, problem.b, new.alpha, new.alpha_bar, S, offsets,
                                    1.0 / (problem.lam * problem.n), _gram_arg(problem, gram),
                                    problem.loss.code)
    if status != _kernels.OK:
        _raise_kernel_failure(status, problem, state, S)
    return new


def sdca_step(problem: ErmProblem, state: DualState, S, v) -> DualState:
    """Minibatch SDCA step with ESO vector ``v`` (on the ``A^T A`` scale)."""
    S, offsets = _one_subset(problem, S)
    new = state.copy()
    vt = np.ascontiguousarray(v, dtype=float) / (problem.lam * problem.n)
    _kernels.sdca_steps(problem.At, problem.b, new.alpha, new.alpha_bar, S, offsets,
                        1.0 / (problem.lam * problem.n), vt, problem.loss.code)
    return new


def erm_eso_vector(problem: ErmProblem, spec: SamplingSpec, strategy: str = "certified_scaling",
                   rtol: float = 1e-6) -> np.ndarray:
    """ESO vector for ``A^T A``.

    For tau-nice samplings ``E[(A^T A)_S] = (tau/n)((1 - c) D + c A^T A)`` with
    ``c = (tau - 1)/(n - 1)``, so the smallest certified multiple of the diagonal
    is ``beta = 1 - c + c lambda'`` exactly; ``lambda'`` comes from the smaller of
    the two normalized Gram matrices. Other samplings fall back to bisection.
    """
    norms2 = np.einsum("ij,ij->j", problem.A, problem.A)
    if np.any(norms2 <= 0):
        raise ValueError("ESO needs every example to be nonzero")
    if spec.kind != "tau_nice":
        return eso_vector(spec, problem.gram(), strategy, rtol=rtol)
    An = problem.A / np.sqrt(norms2)
    lam_prime = largest_eigenvalue(An @ An.T if problem.d <= problem.n else An.T @ An)
    tau, n = spec.tau, spec.n
    if strategy == "conservative":
        return min(float(tau), lam_prime) * norms2
    if strategy != "certified_scaling":
        raise ValueError(f"unknown ESO strategy {strategy!r}")
    c = (tau - 1) / (n - 1) if n > 1 else 0.0
    beta = min(float(tau), max(1.0, 1.0 - c + c * lam_prime))
    return beta * norms2


def dual_as_composite(problem: ErmProblem):
    """``-D`` written as ``f + sum psi_i``: quadratic f with ``M = A^T A/(lam n^2)``."""
    n = problem.n
    f = QuadraticObjective(problem.gram() / (problem.lam * n * n))
    psi = conjugate_loss_term(problem.loss, problem.b, 1.0 / n)
    return f, psi


def _record(solver, tau, seed, k, n, elapsed, problem, alpha, w):
    P = primal_value(problem, w)
    D = dual_value(problem, alpha)
    return TraceRecord(solver, tau, seed, k, k * tau / n, elapsed, P, D, P - D)


def run_erm(solver: str, problem: ErmProblem, spec: SamplingSpec, epochs: float, rng,
            checkpoint_every: int | None = None, eps: float | None = None, v=None,
            seed=None, gram: str = "lazy", alpha0=None) -> list[TraceRecord]:
    """Run SDNA or minibatch SDCA for ``epochs`` passes (n / E|S| iterations each).

    Records P, D and the gap every ``checkpoint_every`` iterations (default:
    once per epoch) and stops early once the gap falls below ``eps``. Wall time
    covers the step loop only.
    """
    if solver not in ("sdna", "sdca"):
        raise ValueError(f"unknown solver {solver!r}")
    if spec.n != problem.n:
        raise ValueError("sampling dimension does not match the number of examples")
    if not spec.is_uniform:
        raise UnsupportedSamplingError("ERM solvers need a uniform sampling")
    n = problem.n
    tau = probability_vector(spec).tau_expected
    if float(tau).is_integer():
        tau = int(tau)
    total = math.ceil(epochs * n / tau - 1e-9) if epochs > 0 else 0
    if checkpoint_every is None:
        checkpoint_every = max(1, round(n / tau))
    inv_ln = 1.0 / (problem.lam * n)
    At, b, code = problem.At, problem.b, problem.loss.code
    state = DualState.zeros(problem) if alpha0 is None else DualState.from_alpha(problem, alpha0)
    alpha, w = state.alpha, state.alpha_bar
    if solver == "sdca":
        if v is None:
            v = erm_eso_vector(problem, spec)
        vt = np.ascontiguousarray(v, dtype=float) * inv_ln
    else:
        gram_arr = _gram_arg(problem, gram)
    elapsed = 0.0
    trace = [_record(solver, tau, seed, 0, n, 0.0, problem, alpha, w)]
    k = 0
    while k < total:
        if eps is not None and trace[-1].gap < eps:
            break
        chunk = min(checkpoint_every, total - k)
        batch = draw_many(spec, rng, chunk)
        t0 = time.perf_counter()
        if solver == "sdna":
            status, done = _kernels.sdna_steps(At, b, alpha, w, batch.indices, batch.offsets,
                                               inv_ln, gram_arr, code)
        else:
            status, done = _kernels.sdca_steps(At, b, alpha, w, batch.indices, batch.offsets,
                                               inv_ln, vt, code)
        elapsed += time.perf_counter() - t0
        if status != _kernels.OK:
            _raise_kernel_failure(status, problem, DualState(alpha, w), batch.subset(done))
        k += chunk
        drift = state.drift(problem)
        if drift > DRIFT_TOL:
            log.warning("alpha_bar drifted by %.3e at iteration %d; refreshing", drift, k)
            w[:] = problem.A @ alpha * inv_ln
        rec = _record(solver, tau, seed, k, n, elapsed, problem, alpha, w)
        prev = trace[-1].dual
        if solver == "sdna" and rec.dual < prev - ASCENT_TOL * (1 + abs(prev)):
            raise InvariantViolation(f"SDNA decreased the dual at iteration {k}: {prev} -> {rec.dual}")
        trace.append(rec)
    return trace
