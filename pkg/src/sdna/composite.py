"""Randomized methods for ``F(x) = f(x) + sum_i psi_i(x_i)`` with separable psi.

``alg1_step`` minimizes the block upper model of f on ``S`` plus the exact
separable term (proximal method 1); ``pcdm_step`` solves one scalar proximal
problem per coordinate using an ESO vector (parallel coordinate descent).
"""
from __future__ import annotations

import time

import numpy as np

from . import _kernels
from .errors import InnerSolverError, InvariantViolation, UnsupportedSamplingError
from .linalg import as_subset, solve_block
from .losses import get_loss
from .sampling import SamplingSpec, draw_many, eso_vector, probability_vector
from .trace import TraceRecord

MAX_INNER_SWEEPS = 100


class QuadraticTerm:
    """``psi_i(t) = a_i t^2 / 2 + b_i t`` (``a = b = 0`` is the zero term)."""

    is_quadratic = True

    def __init__(self, a, b=None):
        self.a = np.asarray(a, dtype=float)
        self.b = np.zeros_like(self.a) if b is None else np.asarray(b, dtype=float)
        if np.any(self.a < 0):
            raise ValueError("quadratic coefficients must be nonnegative")

    @property
    def gamma(self):
        return self.a

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return float(np.sum(0.5 * self.a * x * x + self.b * x))

    def partial_value(self, xS, S):
        return float(np.sum(0.5 * self.a[S] * xS * xS + self.b[S] * xS))

    def derivative(self, x, S):
        return self.a[S] * x + self.b[S]

    def scalar_prox(self, c, v, y, S):
        """argmin_u  c u + (v/2) u^2 + psi_i(y + u), elementwise over ``S``."""
        a, b = self.a[S], self.b[S]
        return -(c + a * y + b) / (v + a)


class ConjugateLossTerm:
    """``psi_i(t) = scale * phi_i*(-t)`` for the logistic loss.

    The dual of a logistic ERM problem has this separable part with
    ``scale = 1/n``; its domain is ``b_i t`` in [0, 1].
    """

    is_quadratic = False

    def __init__(self, labels, scale: float = 1.0):
        self.loss = get_loss("logistic")
        self.labels = np.asarray(labels, dtype=float)
        self.loss.check_labels(self.labels)
        self.scale = float(scale)

    @property
    def gamma(self):
        return np.full(self.labels.size, self.scale * self.loss.gamma)

    def value(self, x):
        return float(self.scale * np.sum(self.loss.conjugate(-np.asarray(x, dtype=float), self.labels)))

    def partial_value(self, xS, S):
        return float(self.scale * np.sum(self.loss.conjugate(-np.asarray(xS), self.labels[S])))

    def derivative(self, x, S):
        return -self.scale * self.loss.conjugate_derivative(-np.asarray(x), self.labels[S])

    def scalar_prox(self, c, v, y, S):
        b = self.labels[S]
        out = np.empty(len(b))
        for j in range(len(b)):
            out[j] = _kernels.logistic_conj_prox(
                c[j] / self.scale, v[j] / self.scale, y[j], b[j]
            )
        return out


def zero_term(n: int) -> QuadraticTerm:
    return QuadraticTerm(np.zeros(n))


def conjugate_loss_term(loss, labels, scale: float):
    """Separable part ``scale * phi_i*(-t)`` of an ERM dual, for either loss."""
    loss = get_loss(loss)
    labels = np.asarray(labels, dtype=float)
    if loss.name == "quadratic":
        return QuadraticTerm(np.full(labels.size, scale), -scale * labels)
    return ConjugateLossTerm(labels, scale)


def _alg1_block(g, MSS, psi, S, xS, inner_tol, max_inner):
    if psi.is_quadratic:
        a, b = psi.a[S], psi.b[S]
        B = MSS + np.diag(a)
        return solve_block(B, np.arange(S.size), -(g + a * xS + b))
    m = S.size
    h = np.zeros(m)
    diag = np.diag(MSS)
    for _ in range(max_inner):
        for j in range(m):
            c = g[j] + MSS[j] @ h - diag[j] * h[j]
            h[j] = psi.scalar_prox(np.array([c]), diag[j:j + 1], xS[j:j + 1], S[j:j + 1])[0]
        grad = g + MSS @ h + psi.derivative(xS + h, S)
        model = g @ h + 0.5 * h @ MSS @ h + psi.partial_value(xS + h, S)
        tol = inner_tol if inner_tol is not None else 1e-10 * (1 + abs(model))
        if np.linalg.norm(grad) <= tol:
            return h
    raise InnerSolverError(
        f"inner coordinate minimization did not converge in {max_inner} sweeps "
        f"(gradient norm {np.linalg.norm(grad):.3e})",
        subset=S.tolist(), gradient=g.tolist(), residual=float(np.linalg.norm(grad)),
    )


def alg1_step(oracle, M, psi, S, x, inner_tol=None, max_inner: int = MAX_INNER_SWEEPS):
    """One step of the proximal block Newton method on subset ``S``."""
    x = np.asarray(x, dtype=float)
    S = as_subset(S, x.size)
    g = oracle.partial_gradient(x, S)
    MSS = np.asarray(M)[np.ix_(S, S)]
    out = x.copy()
    out[S] += _alg1_block(g, MSS, psi, S, x[S], inner_tol, max_inner)
    return out


def alg1_optimality_residual(oracle, M, psi, S, x, x_new) -> float:
    """Norm of the gradient of the subproblem model at the returned step."""
    S = as_subset(S, np.size(x))
    h = (np.asarray(x_new) - np.asarray(x))[S]
    g = oracle.partial_gradient(x, S)
    MSS = np.asarray(M)[np.ix_(S, S)]
    return float(np.linalg.norm(g + MSS @ h + psi.derivative(np.asarray(x)[S] + h, S)))


def pcdm_step(oracle, v, psi, S, x):
    """One PCDM step: independent scalar proximal problems for ``i in S``."""
    x = np.asarray(x, dtype=float)
    S = as_subset(S, x.size)
    g = oracle.partial_gradient(x, S)
    out = x.copy()
    out[S] += psi.scalar_prox(g, np.asarray(v, dtype=float)[S], x[S], S)
    return out


def composite_value(oracle, psi, x) -> float:
    return float(oracle.value(x) + psi.value(x))


def reference_minimizer(oracle, psi, x0=None, tol: float = 1e-13, max_iter: int = 10_000):
    """Minimizer of F by full-support proximal Newton iterations to a fixed point."""
    n = oracle.n
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    full = np.arange(n)
    for _ in range(max_iter):
        x_new = alg1_step(oracle, oracle.M, psi, full, x, max_inner=100 * MAX_INNER_SWEEPS)
        if np.linalg.norm(x_new - x) < tol:
            return x_new
        x = x_new
    raise InnerSolverError(f"reference minimizer did not reach step norm {tol} in {max_iter} iterations")


def run_composite(algorithm: str, oracle, psi, spec: SamplingSpec, x0, iterations: int, rng,
                  v=None, x_star=None, checkpoint_every: int = 1, seed=None) -> list[TraceRecord]:
    """Run ``alg1`` or ``pcdm`` and record ``F(x^k) - F(x*)`` at checkpoints."""
    if not spec.is_uniform:
        raise UnsupportedSamplingError("composite methods need a uniform sampling")
    M = oracle.M
    if algorithm == "alg1":
        def step(S, x):
            return alg1_step(oracle, M, psi, S, x)
    elif algorithm == "pcdm":
        if v is None:
            v = eso_vector(spec, M, "certified_scaling")

        def step(S, x):
            return pcdm_step(oracle, v, psi, S, x)
    else:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    if x_star is None:
        x_star = reference_minimizer(oracle, psi)
    F_star = composite_value(oracle, psi, x_star)
    tau = probability_vector(spec).tau_expected
    if float(tau).is_integer():
        tau = int(tau)
    n = spec.n
    x = np.array(x0, dtype=float)
    F = composite_value(oracle, psi, x)
    elapsed = 0.0
    trace = [TraceRecord(algorithm, tau, seed, 0, 0.0, 0.0, F, gap=F - F_star)]
    k = 0
    while k < iterations:
        chunk = min(checkpoint_every, iterations - k)
        for S in draw_many(spec, rng, chunk):
            t0 = time.perf_counter()
            x = step(S, x)
            elapsed += time.perf_counter() - t0
            F_new = composite_value(oracle, psi, x)
            if algorithm == "alg1" and F_new > F + 1e-12 * (1 + abs(F)):
                raise InvariantViolation(f"alg1 increased F at iteration {k}: {F} -> {F_new}")
            F = F_new
            k += 1
        trace.append(TraceRecord(algorithm, tau, seed, k, k * tau / n, elapsed, F, gap=F - F_star))
    return trace
