import json

import numpy as np
import pytest

from sdna.erm import DualState, ErmProblem, sdna_step
from sdna.ihs import (
    ihs_update,
    least_squares_optimum,
    primal_stationarity,
    selector,
    verify_ihs_equivalence,
)
from sdna.sampling import SamplingSpec, make_rng

from conftest import random_erm


def test_selector():
    np.testing.assert_array_equal(selector([0, 2], 3), [[1, 0], [0, 0], [0, 1]])


def test_zero_targets_give_zero_optimum():
    P = random_erm(0)
    P = ErmProblem(P.A, np.zeros(P.n))
    w, alpha = least_squares_optimum(P)
    np.testing.assert_array_equal(w, 0.0)
    np.testing.assert_array_equal(alpha, 0.0)


def test_identity_data_halves_targets():
    n = 5
    b = np.arange(1.0, n + 1)
    w, alpha = least_squares_optimum(ErmProblem(np.eye(n), b, lam=1.0 / n))
    np.testing.assert_allclose(alpha, b / 2, rtol=1e-14)
    np.testing.assert_allclose(w, b / 2, rtol=1e-14)


def test_optimum_matches_primal_normal_equations():
    P = random_erm(1, d=7, n=12, lam=0.03)
    w, _ = least_squares_optimum(P)
    H = P.A @ P.A.T / P.n + P.lam * np.eye(P.d)
    np.testing.assert_allclose(w, np.linalg.solve(H, P.A @ P.b / P.n), rtol=1e-10)
    assert primal_stationarity(P, w) < 1e-12


def test_full_subset_update_lands_on_optimum(rng):
    P = random_erm(2)
    w_star, _ = least_squares_optimum(P)
    # the alpha terms cancel against lam*w_k whenever w_k = A alpha/(lam n)
    state = DualState.from_alpha(P, rng.standard_normal(P.n))
    np.testing.assert_allclose(ihs_update(P, state.w, state.alpha, range(P.n)), w_star, rtol=1e-9, atol=1e-12)


def test_heavy_regularization_keeps_iterate():
    P = random_erm(3, lam=1e6)
    w_k = np.linspace(-1, 1, P.d)
    out = ihs_update(P, w_k, np.zeros(P.n), [0, 3, 5])
    np.testing.assert_allclose(out, w_k, atol=1e-6)


@pytest.mark.parametrize("tau", [1, 3, 10])
def test_update_equals_sdna_primal(tau, rng):
    P = random_erm(4, lam=0.05)
    state = DualState.from_alpha(P, rng.standard_normal(P.n))
    S = rng.choice(P.n, tau, replace=False)
    np.testing.assert_allclose(ihs_update(P, state.w, state.alpha, S), sdna_step(P, state, S).w,
                               rtol=1e-8, atol=1e-12)


def test_verification_passes_and_reports():
    P = random_erm(5, d=8, n=24)
    report = verify_ihs_equivalence(P, SamplingSpec.tau_nice(P.n, 4), 50, make_rng(0))
    assert report.passed
    assert report.max_discrepancy <= 1e-8
    data = json.loads(report.dumps())
    assert data["pass"] is True and data["steps"] == 50 and data["first_failure_step"] is None


def test_full_sampling_single_step():
    P = random_erm(6)
    report = verify_ihs_equivalence(P, SamplingSpec.tau_nice(P.n, P.n), 1, make_rng(0))
    assert report.passed


def test_injected_fault_is_caught_immediately():
    P = random_erm(7, d=8, n=24)
    report = verify_ihs_equivalence(P, SamplingSpec.tau_nice(P.n, 4), 20, make_rng(0), fault=True)
    assert not report.passed
    assert report.first_failure_step == 1


def test_logistic_rejected():
    with pytest.raises(ValueError):
        least_squares_optimum(random_erm(8, loss="logistic"))
