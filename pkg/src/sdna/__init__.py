"""Stochastic dual Newton ascent and related randomized subspace methods.

Submodules:

* ``linalg`` -- principal-submatrix factorizations and eigenvalue helpers
* ``sampling`` -- random subset samplings, expected operators, ESO vectors
* ``rates`` -- linear convergence-rate constants and their orderings
* ``smooth`` / ``composite`` -- randomized methods for smooth and composite problems
* ``erm`` -- SDNA and minibatch SDCA on the dual of L2-regularized ERM
* ``ihs`` -- least-squares sketch view of SDNA
* ``data`` -- LIBSVM I/O and synthetic data
* ``bench`` / ``cli`` -- sweeps, timing and the ``sdna`` command
"""
from .erm import (
    DualState,
    ErmProblem,
    dual_value,
    duality_gap,
    primal_value,
    run_erm,
    sdca_step,
    sdna_step,
)
from .errors import SdnaError
from .rates import RateReport, erm_rate_report, smooth_rate_report
from .sampling import SamplingSpec, draw, draw_many, make_rng

__version__ = "0.1.0"

__all__ = [
    "DualState",
    "ErmProblem",
    "RateReport",
    "SamplingSpec",
    "SdnaError",
    "draw",
    "draw_many",
    "dual_value",
    "duality_gap",
    "erm_rate_report",
    "make_rng",
    "primal_value",
    "run_erm",
    "sdca_step",
    "sdna_step",
    "smooth_rate_report",
]
