"""End-to-end acceptance checks, one test per criterion.

Run with ``pytest tests/test_acceptance.py -s`` to see a PASS/FAIL line for each;
the lines are also repeated in the terminal summary of any pytest run.
"""
import statistics
import time

import numpy as np
import pytest

from sdna.bench import epochs_to_gap, run_cell, Cell, seconds_per_epoch
from sdna.data import generate_synthetic, normalize_columns, to_problem
from sdna.erm import DualState, dual_value, erm_eso_vector, primal_value, run_erm
from sdna.ihs import least_squares_optimum, verify_ihs_equivalence
from sdna.linalg import min_generalized_eigenvalue, smallest_eigenvalue
from sdna.losses import LogisticLoss, QuadraticLoss
from sdna.rates import (
    erm_rate_report,
    erm_sigma1_prox,
    method2_matrix,
    sigma1,
    sigma1_prox,
    sigma2,
    sigma3,
    sigma3_prox,
    tau_nice_sigma2_relation,
    theta,
)
from sdna.sampling import (
    SamplingSpec,
    certified_beta,
    draw_many,
    eso_vector,
    expected_pseudoinverse,
    make_rng,
)
from sdna.smooth import QuadraticObjective, make_stepper, run_smooth

from conftest import EXAMPLE_M, random_pd, record_criterion

PRINTED_PSEUDOINVERSE = np.array([
    [1683.50, -16.58, -1666.58],
    [-16.58, 33.50, -16.58],
    [-1666.58, -16.58, 1683.50],
])
PRINTED_METHOD2 = np.array([
    [0.9967, -0.3268, -0.3365],
    [-0.3268, 0.9902, -0.3268],
    [-0.3365, -0.3268, 0.9967],
])


def synthetic_problem(d, n, seed, lam=None):
    raw = normalize_columns(generate_synthetic(d, n, seed, 1.0, 0.1, task="regression"))
    return to_problem(raw, "quadratic", lam)


def test_criterion_1_example_fixture():
    t0 = time.perf_counter()
    spec = SamplingSpec.tau_nice(3, 2)
    s1 = sigma1(EXAMPLE_M, None, spec)
    s2 = sigma2(EXAMPLE_M, None, spec)
    s3 = sigma3(EXAMPLE_M, None, spec, [2.0, 2.0, 2.0])
    P = expected_pseudoinverse(spec, EXAMPLE_M)
    Q = method2_matrix(spec, EXAMPLE_M)
    elapsed = time.perf_counter() - t0
    ok = (abs(s1 / 0.3350 - 1) <= 1e-3 and abs(s2 / 1.333e-4 - 1) <= 0.01 and abs(s3 / 0.333e-4 - 1) <= 0.01
          and np.max(np.abs(P - PRINTED_PSEUDOINVERSE)) <= 0.01
          and np.max(np.abs(Q - PRINTED_METHOD2)) <= 0.01 and elapsed < 1.0)
    record_criterion(1, ok, f"sigma1={s1:.6f} sigma2={s2:.5e} sigma3={s3:.5e} "
                     f"max|E[M_S^+] err|={np.max(np.abs(P - PRINTED_PSEUDOINVERSE)):.2e} "
                     f"max|method2 err|={np.max(np.abs(Q - PRINTED_METHOD2)):.2e} time={elapsed:.3f}s")
    assert ok


def test_criterion_2_ordering_suite():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst, positive = np.inf, True
    for i in range(200):
        n = int(rng.integers(3, 9))
        tau = int(rng.integers(1, n + 1))
        spec = SamplingSpec.tau_nice(n, tau)
        M = random_pd(rng, n)
        if i % 2 == 0:
            G = M
        else:
            G = random_pd(rng, n, ridge=0.05)
            # scale G under M so that G <= M
            G = G * min(1.0, 0.9 * min_generalized_eigenvalue(G, M))
        v = eso_vector(spec, M)
        s1, s2, s3 = sigma1(M, G, spec), sigma2(M, G, spec), sigma3(M, G, spec, v)
        gamma = float(rng.uniform(0.0, 1.0))
        s1p, s3p = sigma1_prox(M, G, gamma, spec), sigma3_prox(M, G, gamma, v, spec)
        A = rng.standard_normal((int(rng.integers(1, 7)), n))
        erm = erm_rate_report(A, float(rng.uniform(0.05, 1.0)), 1.0, spec)
        slacks = [s3, s2 - s3, s1 - s2, 1 - s1, s1p - s3p,
                  erm.sigma1_prox - erm.theta, erm.sigma1 - erm.sigma1_prox]
        worst = min(worst, min(slacks))
        positive &= s3 > 0
    elapsed = time.perf_counter() - t0
    ok = worst >= -1e-10 and positive and elapsed < 30
    record_criterion(2, ok, f"200 instances, worst ordering slack {worst:.3e}, time={elapsed:.1f}s")
    assert ok


def random_sampling(rng, n):
    if rng.random() < 0.5:
        return SamplingSpec.tau_nice(n, int(rng.integers(1, n + 1)))
    atoms = [tuple(np.flatnonzero(rng.random(n) < 0.5)) or (int(rng.integers(n)),) for _ in range(5)]
    atoms += [(i,) for i in range(n)]
    probs = rng.dirichlet(np.ones(len(atoms)))
    return SamplingSpec.explicit(n, list(zip(atoms, probs)))


def test_criterion_3_pseudoinverse_gap_enumeration():
    rng = np.random.default_rng(3)
    worst = np.inf
    for _ in range(100):
        n = int(rng.integers(2, 8))
        M = random_pd(rng, n)
        spec = random_sampling(rng, n)
        worst = min(worst, smallest_eigenvalue(expected_pseudoinverse(spec, M) - method2_matrix(spec, M)))
    ok = worst >= -1e-9
    record_criterion(3, ok, f"100 instances, min eigenvalue of the difference {worst:.3e}")
    assert ok


def test_criterion_4_rate_realization():
    rng = np.random.default_rng(4)
    n, tau, trials = 6, 2, 2000
    f = QuadraticObjective(random_pd(rng, n), rng.standard_normal(n))
    spec = SamplingSpec.tau_nice(n, tau)
    v = eso_vector(spec, f.M)
    x0 = f.minimizer + rng.standard_normal(n)
    r0 = f.value(x0) - f.f_star
    sigmas = {1: sigma1(f.M, None, spec), 2: sigma2(f.M, None, spec), 3: sigma3(f.M, None, spec, v)}
    draws = draw_many(spec, make_rng(40), trials)
    parts, ok = [], True
    for m, sigma in sigmas.items():
        step = make_stepper(m, f, spec, v)
        ratios = np.array([(f.value(step(S, x0)) - f.f_star) / r0 for S in draws])
        mean, se = ratios.mean(), ratios.std(ddof=1) / np.sqrt(trials)
        ok &= mean <= 1 - sigma + 3 * se
        parts.append(f"method{m} mean={mean:.4f} bound={1 - sigma:.4f}+3se({se:.1e})")
    # method 1 must decrease f on every trajectory; run_smooth raises otherwise
    for seed in range(50):
        trace = run_smooth(1, f, spec, x0, 40, make_rng(seed))
        values = [r.primal for r in trace]
        ok &= all(b <= a + 1e-12 for a, b in zip(values, values[1:]))
    record_criterion(4, bool(ok), "; ".join(parts) + "; method1 monotone on 50 trajectories")
    assert ok


def test_criterion_5_sigma2_relation_identity():
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(2, 8))
        tau = int(rng.integers(1, n + 1))
        M = random_pd(rng, n)
        spec = SamplingSpec.tau_nice(n, tau)
        beta = certified_beta(spec, M)
        s3 = sigma3(M, None, spec, beta * np.diag(M))
        worst = max(worst, abs(sigma2(M, None, spec) - tau_nice_sigma2_relation(beta, s3, n, tau)))
    ok = worst <= 1e-10
    record_criterion(5, ok, f"50 instances, max |sigma2 - relation| = {worst:.3e}")
    assert ok


def test_criterion_6_coincidence_at_tau_one():
    rng = np.random.default_rng(6)
    n = 7
    f = QuadraticObjective(random_pd(rng, n), rng.standard_normal(n))
    spec = SamplingSpec.serial_uniform(n)
    steps = [make_stepper(m, f, spec, np.diag(f.M)) for m in (1, 2, 3)]
    xs = [rng.standard_normal(n)] * 3
    worst_smooth = 0.0
    for S in draw_many(spec, make_rng(60), 300):
        xs = [step(S, x) for step, x in zip(steps, xs)]
        worst_smooth = max(worst_smooth, np.max(np.abs(xs[1] - xs[0])), np.max(np.abs(xs[2] - xs[0])))
    P = synthetic_problem(16, 40, 6)
    spec = SamplingSpec.serial_uniform(P.n)
    a = run_erm("sdna", P, spec, 10, make_rng(61), checkpoint_every=1)
    b = run_erm("sdca", P, spec, 10, make_rng(61), checkpoint_every=1)
    worst_erm = max(max(abs(x.primal - y.primal), abs(x.dual - y.dual), abs(x.gap - y.gap))
                    for x, y in zip(a, b))
    same_iters = [r.iteration for r in a] == [r.iteration for r in b]
    ok = worst_smooth <= 1e-12 and worst_erm <= 1e-12 and same_iters
    record_criterion(6, ok, f"methods 1/2/3 max iterate diff {worst_smooth:.2e}; "
                     f"SDNA vs SDCA max trace diff {worst_erm:.2e} over {len(a)} checkpoints")
    assert ok


def test_criterion_7_erm_bounds_monte_carlo():
    t0 = time.perf_counter()
    P = synthetic_problem(10, 20, 7)
    _, alpha_star = least_squares_optimum(P)
    d_star, d_zero = dual_value(P, alpha_star), dual_value(P, np.zeros(P.n))
    ks = (5, 20, 50)
    parts, ok = [], True
    for tau in (1, 4):
        spec = SamplingSpec.tau_nice(P.n, tau)
        v = erm_eso_vector(P, spec)
        th = theta(spec, v, P.lam, P.gamma)
        s1p = erm_sigma1_prox(P.A, P.lam, P.gamma, spec)
        bounds = {"sdna": lambda k: (1 - s1p) ** k / th * (d_star - d_zero),
                  "sdca": lambda k: (1 - th) ** k / th * (d_star - d_zero)}
        for solver in ("sdna", "sdca"):
            gaps = {k: [] for k in ks}
            for seed in range(1000):
                trace = run_erm(solver, P, spec, max(ks) * tau / P.n, make_rng(seed), checkpoint_every=1, v=v)
                for k in ks:
                    gaps[k].append(trace[k].gap)
            for k in ks:
                mean = float(np.mean(gaps[k]))
                ok &= mean <= bounds[solver](k)
                parts.append(f"{solver} tau={tau} k={k}: {mean:.2e}<={bounds[solver](k):.2e}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 120
    record_criterion(7, bool(ok), "; ".join(parts) + f"; time={elapsed:.1f}s")
    assert ok


@pytest.mark.slow
def test_criterion_8_epochs_to_gap_ordering():
    P = synthetic_problem(128, 256, 0)
    taus, seeds, eps = (1, 8, 64), range(5), 1e-6
    med = {}
    for solver in ("sdna", "sdca"):
        for tau in taus:
            runs = [epochs_to_gap(run_cell(P, Cell(solver, tau, s), 60, eps=eps, checkpoint_every=1), eps)
                    for s in seeds]
            med[solver, tau] = statistics.median(runs)
    sdna = [med["sdna", t] for t in taus]
    sdca = [med["sdca", t] for t in taus]
    ok_sdna = all(b <= a for a, b in zip(sdna, sdna[1:])) and sdna[-1] < sdna[0]
    ok_sdca = all(b >= a for a, b in zip(sdca, sdca[1:]))
    ok = ok_sdna and ok_sdca
    record_criterion(8, ok, "median epochs to gap 1e-6 at tau=1/8/64: "
                     f"SDNA {sdna[0]:.2f}/{sdna[1]:.2f}/{sdna[2]:.2f} ({'ok' if ok_sdna else 'not non-increasing'}), "
                     f"SDCA {sdca[0]:.2f}/{sdca[1]:.2f}/{sdca[2]:.2f} ({'ok' if ok_sdca else 'not non-decreasing'})")
    assert ok


def test_criterion_9_ihs_equivalence():
    P = synthetic_problem(16, 64, 9)
    report = verify_ihs_equivalence(P, SamplingSpec.tau_nice(64, 4), 50, make_rng(9))
    w_star, alpha_star = least_squares_optimum(P)
    H = P.A @ P.A.T / P.n + P.lam * np.eye(P.d)
    w_primal = np.linalg.solve(H, P.A @ P.b / P.n)
    identity_err = float(np.max(np.abs(w_primal - P.A @ alpha_star / (P.lam * P.n))))
    ok = report.passed and report.max_discrepancy <= 1e-8 and identity_err <= 1e-10
    record_criterion(9, ok, f"50 lockstep steps, max discrepancy {report.max_discrepancy:.2e}; "
                     f"optimum identity error {identity_err:.2e}")
    assert ok


def test_criterion_10_conjugates():
    rng = np.random.default_rng(10)
    worst = 0.0
    for loss in (QuadraticLoss(), LogisticLoss()):
        t = rng.uniform(-6, 6, 10_000)
        b = rng.choice([-1.0, 1.0], 10_000) if loss.name == "logistic" else rng.standard_normal(10_000)
        u = loss.derivative(t, b)
        worst = max(worst, float(np.max(np.abs(loss.value(t, b) + loss.conjugate(u, b) - t * u))))
    P = synthetic_problem(8, 30, 10)
    zero_q = dual_value(P, np.zeros(P.n))
    L = to_problem(normalize_columns(generate_synthetic(8, 30, 10)), "logistic")
    zero_l = dual_value(L, np.zeros(L.n))
    # the dual at zero is -(1/n) sum phi*(0) = 0 for both losses, and P(0) is |b|^2/(2n) and log 2
    primal_ok = (abs(primal_value(P, np.zeros(P.d)) - P.b @ P.b / (2 * P.n)) <= 1e-12
                 and abs(primal_value(L, np.zeros(L.d)) - np.log(2)) <= 1e-12)
    state = DualState.zeros(P)
    ok = worst <= 1e-10 and zero_q == 0.0 and zero_l == 0.0 and primal_ok and state.drift(P) == 0.0
    record_criterion(10, ok, f"max Fenchel-Young residual {worst:.2e} over 2x10^4 points; "
                     f"D(0)={zero_q} (quadratic), {zero_l} (logistic)")
    assert ok


@pytest.mark.slow
def test_criterion_11_epoch_timing_shape():
    P = synthetic_problem(128, 256, 0)
    taus = (1, 8, 64)
    sdca = [seconds_per_epoch(P, "sdca", t, epochs=11) for t in taus]
    sdna = [seconds_per_epoch(P, "sdna", t, epochs=11) for t in taus]
    ok_sdca = max(sdca) / min(sdca) < 3
    ok_sdna = all(b > a for a, b in zip(sdna, sdna[1:]))
    ok = ok_sdca and ok_sdna
    record_criterion(11, ok, "seconds/epoch at tau=1/8/64: "
                     f"SDCA {sdca[0]:.2e}/{sdca[1]:.2e}/{sdca[2]:.2e} (spread {max(sdca) / min(sdca):.2f}x), "
                     f"SDNA {sdna[0]:.2e}/{sdna[1]:.2e}/{sdna[2]:.2e}")
    assert ok
