import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sdna.erm import ErmProblem

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

EXAMPLE_M = np.array([
    [1.0, 0.99, 0.9999],
    [0.99, 1.0, 0.99],
    [0.9999, 0.99, 1.0],
])


def random_pd(rng, n, ridge=0.1):
    B = rng.standard_normal((n, n))
    return B @ B.T / n + ridge * np.eye(n)


def random_erm(seed, d=6, n=10, loss="quadratic", lam=None):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((d, n))
    A /= np.linalg.norm(A, axis=0)
    if loss == "logistic":
        b = np.where(rng.standard_normal(n) >= 0, 1.0, -1.0)
    else:
        b = rng.standard_normal(n)
    return ErmProblem(A, b, loss, lam)


@pytest.fixture
def example_m():
    return EXAMPLE_M.copy()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one "[PASS]/[FAIL] criterion N: ..." line per acceptance check, echoed in the terminal summary
ACCEPTANCE_LINES = []


def record_criterion(number, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
