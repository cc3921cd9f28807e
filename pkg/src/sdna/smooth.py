"""Randomized subspace methods for smooth strongly convex minimization.

All three methods update ``x <- x + h`` with ``h`` supported on a random subset
``S``:

* method 1: ``h = -(M_S)^+ grad f(x)`` (exact block Newton on the upper model),
* method 2: ``h = -I_S E[M_S]^{-1} D(p) grad f(x)``,
* method 3: ``h_i = -grad_i f(x) / v_i`` for an ESO vector ``v`` (NSync).
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DivergenceError, InvariantViolation
from .linalg import as_subset, as_symmetric, solve_block
from .sampling import (
    SamplingSpec,
    draw_many,
    eso_vector,
    expected_submatrix,
    probability_vector,
)
from .trace import TraceRecord

MAX_DENSE_N = 4096
DIVERGENCE_FACTOR = 1e6


class QuadraticObjective:
    """``f(x) = x^T M x / 2 - c^T x``; satisfies both curvature bounds with ``G = M``."""

    def __init__(self, M, c=None):
        self.M = as_symmetric(M)
        self.n = self.M.shape[0]
        self.c = np.zeros(self.n) if c is None else np.asarray(c, dtype=float)
        self._x_star = None

    @property
    def G(self):
        return self.M

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * x @ (self.M @ x) - self.c @ x

    def gradient(self, x):
        return self.M @ np.asarray(x, dtype=float) - self.c

    def partial_gradient(self, x, S):
        return self.M[S] @ np.asarray(x, dtype=float) - self.c[S]

    @property
    def minimizer(self):
        if self._x_star is None:
            self._x_star = np.linalg.solve(self.M, self.c)
        return self._x_star

    @property
    def f_star(self):
        x = self.minimizer
        return -0.5 * self.c @ x


@dataclass
class SmoothOracle:
    """A general smooth objective with curvature bounds ``G <= Hessian <= M``."""

    value: Callable
    gradient: Callable
    M: np.ndarray
    G: np.ndarray
    f_star: float | None = None

    @property
    def n(self):
        return self.M.shape[0]

    def partial_gradient(self, x, S):
        return self.gradient(x)[S]


def method1_step(oracle, M, S, x):
    x = np.asarray(x, dtype=float)
    S = as_subset(S, x.size)
    out = x.copy()
    out[S] -= solve_block(M, S, oracle.partial_gradient(x, S))
    return out


def method2_preconditioner(spec: SamplingSpec, M) -> np.ndarray:
    """``E[M_S]^{-1} D(p)``, inverted once per run."""
    if spec.n > MAX_DENSE_N:
        raise ValueError(f"method 2 needs a dense n x n inverse; n > {MAX_DENSE_N} refused")
    p = probability_vector(spec).p
    return np.linalg.solve(expected_submatrix(spec, M), np.diag(p))


def method2_step(oracle, precond, S, x):
    x = np.asarray(x, dtype=float)
    S = as_subset(S, x.size)
    out = x.copy()
    out[S] -= precond[S] @ oracle.gradient(x)
    return out


def method3_step(oracle, v, S, x):
    x = np.asarray(x, dtype=float)
    S = as_subset(S, x.size)
    out = x.copy()
    out[S] -= oracle.partial_gradient(x, S) / np.asarray(v, dtype=float)[S]
    return out


def make_stepper(method, oracle, spec: SamplingSpec, v=None):
    """Return ``step(S, x)`` for method 1, 2 or 3 with any setup precomputed."""
    M = oracle.M
    if method == 1:
        return lambda S, x: method1_step(oracle, M, S, x)
    if method == 2:
        P = method2_preconditioner(spec, M)
        return lambda S, x: method2_step(oracle, P, S, x)
    if method == 3:
        if v is None:
            v = eso_vector(spec, M, "certified_scaling")
        return lambda S, x: method3_step(oracle, v, S, x)
    raise ValueError(f"unknown method {method!r}")


def run_smooth(method, oracle, spec: SamplingSpec, x0, iterations: int, rng,
               checkpoint_every: int = 1, v=None, eps: float | None = None,
               seed=None) -> list[TraceRecord]:
    """Run method 1, 2 or 3 and record ``f(x^k) - f(x*)`` at checkpoints.

    Stops after ``iterations`` steps or once the residual drops below ``eps``.
    Method 1 must decrease f monotonically; an increase raises InvariantViolation.
    """
    f_star = oracle.f_star
    if f_star is None:
        raise ValueError("oracle must provide f_star for residual reporting")
    step = make_stepper(method, oracle, spec, v)
    tau = probability_vector(spec).tau_expected
    n = spec.n
    name = f"method{method}"
    x = np.array(x0, dtype=float)
    f = oracle.value(x)
    r0 = f - f_star
    elapsed = 0.0
    trace = [TraceRecord(name, tau, seed, 0, 0.0, 0.0, f, gap=r0)]
    k = 0
    while k < iterations:
        if eps is not None and trace[-1].gap < eps:
            break
        chunk = min(checkpoint_every, iterations - k)
        batch = draw_many(spec, rng, chunk)
        for S in batch:
            t0 = time.perf_counter()
            x = step(S, x)
            elapsed += time.perf_counter() - t0
            f_new = oracle.value(x)
            if method == 1 and f_new > f + 1e-12 * (1 + abs(f)):
                raise InvariantViolation(f"method 1 increased f at iteration {k}: {f} -> {f_new}")
            f = f_new
            k += 1
            if f - f_star > DIVERGENCE_FACTOR * max(r0, np.finfo(float).tiny):
                raise DivergenceError(
                    f"{name}: residual grew from {r0:.3e} to {f - f_star:.3e} at iteration {k}; "
                    "check the ESO vector and that M is positive definite"
                )
        trace.append(TraceRecord(name, tau, seed, k, k * tau / n, elapsed, f, gap=f - f_star))
    return trace
