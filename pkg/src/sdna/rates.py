"""Linear convergence-rate constants and the orderings between them.

Smooth setting (minimize f with smoothness matrix M and strong-convexity
matrix G, sampling S):

* ``sigma1`` -- exact block Newton steps on random principal submatrices,
* ``sigma2`` -- fixed preconditioner ``E[M_S]^{-1} D(p)``,
* ``sigma3`` -- diagonal steps with an ESO vector v (NSync),

with ``0 < sigma3 <= sigma2 <= sigma1 <= 1``. Composite setting adds
``sigma1_prox`` (proximal block Newton) and ``sigma3_prox`` (PCDM). ERM
setting adds ``theta`` (minibatch SDCA) and the SDNA rates
``erm_sigma1_prox`` / ``erm_sigma1_quadratic`` with
``theta <= erm_sigma1_prox <= erm_sigma1_quadratic``.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import UnsupportedSamplingError
from .linalg import (
    as_symmetric,
    largest_eigenvalue,
    min_congruence_eigenvalue,
    min_generalized_eigenvalue,
    sym_sqrt,
    symmetrize,
)
from .sampling import (
    SamplingSpec,
    eso_vector,
    expected_pseudoinverse,
    expected_submatrix,
    probability_vector,
)

# slack allowed when checking the proven orderings
ORDER_TOL = 1e-10


def _uniform_tau(spec: SamplingSpec) -> float:
    if not spec.is_uniform:
        raise UnsupportedSamplingError("proximal rates are defined for uniform samplings only")
    return probability_vector(spec).tau_expected


def _strong_convexity(M, G):
    return as_symmetric(M) if G is None else as_symmetric(G)


def method2_matrix(spec: SamplingSpec, M) -> np.ndarray:
    """``D(p) E[M_S]^{-1} D(p)``."""
    p = probability_vector(spec).p
    E = expected_submatrix(spec, M)
    return symmetrize(p[:, None] * np.linalg.solve(E, np.diag(p)))


def sigma1(M, G, spec: SamplingSpec, mode: str = "exact", samples: int = 100_000, rng=None) -> float:
    """``lambda_min(G^{1/2} E[(M_S)^+] G^{1/2})``; ``G=None`` means ``G = M``."""
    G = _strong_convexity(M, G)
    P = expected_pseudoinverse(spec, M, mode=mode, samples=samples, rng=rng)
    return min_congruence_eigenvalue(sym_sqrt(G), P)


def sigma2(M, G, spec: SamplingSpec) -> float:
    G = _strong_convexity(M, G)
    return min_congruence_eigenvalue(sym_sqrt(G), method2_matrix(spec, M))


def sigma3(M, G, spec: SamplingSpec, v) -> float:
    G = _strong_convexity(M, G)
    p = probability_vector(spec).p
    return min_congruence_eigenvalue(sym_sqrt(G), np.diag(p / np.asarray(v, dtype=float)))


def sigma1_prox(M, G, gamma, spec: SamplingSpec) -> float:
    """``(tau/n) min(1, s1)``, ``s1 = lambda_min[((n/tau) E[M_S] + D(gamma))^{-1} (D(gamma) + G)]``."""
    M = as_symmetric(M)
    n = spec.n
    tau = _uniform_tau(spec)
    gamma = np.broadcast_to(np.asarray(gamma, dtype=float), (n,))
    G = np.zeros((n, n)) if G is None else as_symmetric(G)
    X = (n / tau) * expected_submatrix(spec, M) + np.diag(gamma)
    s1 = min_generalized_eigenvalue(X, np.diag(gamma) + G)
    return tau * min(1.0, s1) / n


def sigma3_prox(M, G, gamma, v, spec: SamplingSpec) -> float:
    """``(tau/n) min(1, s3)``, ``s3 = lambda_min[D(v + gamma)^{-1} (D(gamma) + G)]``."""
    n = spec.n
    tau = _uniform_tau(spec)
    gamma = np.broadcast_to(np.asarray(gamma, dtype=float), (n,))
    v = np.asarray(v, dtype=float)
    G = np.zeros((n, n)) if G is None else as_symmetric(G)
    s3 = min_generalized_eigenvalue(np.diag(v + gamma), np.diag(gamma) + G)
    return tau * min(1.0, s3) / n


def theta(spec: SamplingSpec, v, lam: float, gamma_loss: float, n: int | None = None) -> float:
    """``min_i p_i lam gamma n / (v_i + lam gamma n)`` with ``v`` on the ``A^T A`` scale."""
    if lam <= 0 or gamma_loss <= 0:
        raise ValueError("lambda and gamma must be positive")
    n = spec.n if n is None else n
    p = probability_vector(spec).p
    lgn = lam * gamma_loss * n
    return float(np.min(p * lgn / (np.asarray(v, dtype=float) + lgn)))


def erm_sigma1_prox(A, lam: float, gamma_loss: float, spec: SamplingSpec) -> float:
    """SDNA rate for general smooth losses; ``A`` is d x n with examples as columns."""
    A = np.asarray(A, dtype=float)
    n = spec.n
    tau = _uniform_tau(spec)
    E = expected_submatrix(spec, A.T @ A)
    s1 = 1.0 / largest_eigenvalue(E / (tau * gamma_loss * lam) + np.eye(n))
    return tau * min(1.0, s1) / n


def erm_sigma1_quadratic(A, lam: float, gamma_loss: float, spec: SamplingSpec,
                         mode: str = "exact", samples: int = 100_000, rng=None) -> float:
    """Sharper SDNA rate for quadratic losses: ``sigma1`` of ``H = A^T A/(lam n) + gamma I``."""
    A = np.asarray(A, dtype=float)
    n = spec.n
    H = A.T @ A / (lam * n) + gamma_loss * np.eye(n)
    return sigma1(H, H, spec, mode=mode, samples=samples, rng=rng)


def tau_nice_sigma2_relation(beta: float, sigma3_value: float, n: int, tau: int) -> float:
    """``sigma2`` predicted from ``sigma3`` when ``G = M``, ``v = beta diag(M)``, tau-nice."""
    a = (tau - 1) / (n - 1) if n > 1 else 0.0
    return beta * sigma3_value / ((1 - a) + (n / tau) * a * beta * sigma3_value)


@dataclass
class RateReport:
    sigma1: float
    sigma2: float
    sigma3: float
    sigma1_prox: float
    sigma3_prox: float
    theta: float | None = None
    context: dict = field(default_factory=dict)
    certified: bool = True
    checks: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


def _ordering_checks(r: RateReport, tol: float = ORDER_TOL) -> dict:
    checks = {
        "sigma3<=sigma2<=sigma1<=1": bool(
            r.sigma3 > 0
            and r.sigma3 <= r.sigma2 + tol
            and r.sigma2 <= r.sigma1 + tol
            and r.sigma1 <= 1 + tol
        ),
        "sigma3_prox<=sigma1_prox": bool(r.sigma3_prox <= r.sigma1_prox + tol),
    }
    if r.theta is not None:
        checks["theta<=sigma1_prox<=sigma1"] = bool(
            r.theta <= r.sigma1_prox + tol and r.sigma1_prox <= r.sigma1 + tol
        )
    return checks


def smooth_rate_report(M, spec: SamplingSpec, G=None, v=None, gamma=0.0,
                       mode: str = "exact", samples: int = 100_000, rng=None) -> RateReport:
    """All smooth and composite rates for ``(M, G, spec)``; ``v`` defaults to the certified ESO."""
    M = as_symmetric(M)
    G = _strong_convexity(M, G)
    if v is None:
        v = eso_vector(spec, M, "certified_scaling")
    report = RateReport(
        sigma1=sigma1(M, G, spec, mode=mode, samples=samples, rng=rng),
        sigma2=sigma2(M, G, spec),
        sigma3=sigma3(M, G, spec, v),
        sigma1_prox=sigma1_prox(M, G, gamma, spec),
        sigma3_prox=sigma3_prox(M, G, gamma, v, spec),
        context={"setting": "smooth", "n": spec.n, "sampling": spec.to_json(),
                 "v": np.asarray(v, dtype=float).tolist(),
                 "gamma": np.broadcast_to(np.asarray(gamma, dtype=float), (spec.n,)).tolist()},
        certified=(mode == "exact"),
    )
    if mode != "exact":
        report.context["mc_samples"] = samples
    report.checks = _ordering_checks(report)
    return report


def erm_rate_report(A, lam: float, gamma_loss: float, spec: SamplingSpec, v=None,
                    mode: str = "exact", samples: int = 100_000, rng=None) -> RateReport:
    """Rates of the ERM dual in the quadratic-loss reading ``M = G = Hessian of -D``.

    ``v`` is the ESO vector for ``A^T A`` (certified scaling by default);
    ``sigma3_prox`` is evaluated on the composite dual form and coincides with ``theta``.
    """
    A = np.asarray(A, dtype=float)
    n = spec.n
    K = A.T @ A
    if v is None:
        v = eso_vector(spec, K, "certified_scaling")
    v = np.asarray(v, dtype=float)
    H = K / (lam * n * n) + (gamma_loss / n) * np.eye(n)
    vH = eso_vector(spec, H, "certified_scaling")
    M_dual = K / (lam * n * n)
    report = RateReport(
        sigma1=erm_sigma1_quadratic(A, lam, gamma_loss, spec, mode=mode, samples=samples, rng=rng),
        sigma2=sigma2(H, H, spec),
        sigma3=sigma3(H, H, spec, vH),
        sigma1_prox=erm_sigma1_prox(A, lam, gamma_loss, spec),
        sigma3_prox=sigma3_prox(M_dual, None, gamma_loss / n, v / (lam * n * n), spec),
        theta=theta(spec, v, lam, gamma_loss),
        context={"setting": "erm", "d": A.shape[0], "n": n, "lambda": lam,
                 "gamma": gamma_loss, "sampling": spec.to_json()},
        certified=(mode == "exact"),
    )
    if mode != "exact":
        report.context["mc_samples"] = samples
    report.checks = _ordering_checks(report)
    return report
