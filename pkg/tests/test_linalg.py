import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sdna.errors import FactorizationError, InvalidSubsetError
from sdna.linalg import (
    as_subset,
    block_inverse,
    is_psd,
    min_generalized_eigenvalue,
    principal_submatrix,
    restricted_solve,
    smallest_eigenvalue,
)

from conftest import EXAMPLE_M, random_pd


def test_principal_submatrix_identity():
    np.testing.assert_array_equal(principal_submatrix(np.eye(3), [0, 2]), np.diag([1.0, 0.0, 1.0]))


def test_principal_submatrix_example():
    expected = np.array([[1.0, 0.99, 0.0], [0.99, 1.0, 0.0], [0.0, 0.0, 0.0]])
    np.testing.assert_array_equal(principal_submatrix(EXAMPLE_M, [0, 1]), expected)


def test_principal_submatrix_triple_product(rng):
    M = random_pd(rng, 4)
    I_S = np.diag([0.0, 1.0, 0.0, 1.0])
    np.testing.assert_allclose(principal_submatrix(M, [1, 3]), I_S @ M @ I_S, atol=1e-15)


@pytest.mark.parametrize("S", [[], [3], [-1], [0, 0]])
def test_invalid_subsets(S):
    with pytest.raises(InvalidSubsetError):
        principal_submatrix(np.eye(3), S)


def test_as_subset_sorts():
    np.testing.assert_array_equal(as_subset([2, 0], 3), [0, 2])


def test_restricted_solve_identity():
    np.testing.assert_array_equal(restricted_solve(np.eye(3), [0, 2], [1.0, 2.0, 3.0]), [1.0, 0.0, 3.0])


def test_restricted_solve_example_block():
    h = restricted_solve(EXAMPLE_M, [0, 1], [1.0, 0.0, 0.0])
    c = 1.0 / (1 - 0.99**2)
    np.testing.assert_allclose(h, [c, -0.99 * c, 0.0], rtol=1e-12)
    np.testing.assert_allclose(h[:2], [50.2513, -49.7487], atol=1e-4)


def test_restricted_solve_full_subset(rng):
    M = random_pd(rng, 5)
    g = rng.standard_normal(5)
    np.testing.assert_allclose(restricted_solve(M, range(5), g), np.linalg.solve(M, g), rtol=1e-10)


def test_singular_block_names_subset():
    M = np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    with pytest.raises(FactorizationError) as err:
        restricted_solve(M, [0, 1], np.ones(3))
    assert err.value.subset == (0, 1)
    restricted_solve(M, [0, 2], np.ones(3))


def test_indefinite_block_rejected():
    with pytest.raises(FactorizationError):
        restricted_solve(np.array([[1.0, 2.0], [2.0, 1.0]]), [0, 1], np.ones(2))


def test_smallest_eigenvalue_examples():
    assert smallest_eigenvalue(np.diag([2.0, 5.0, 7.0])) == pytest.approx(2.0, rel=1e-10)
    assert smallest_eigenvalue(np.array([[2.0, 1.0], [1.0, 2.0]])) == pytest.approx(1.0, rel=1e-10)


def test_is_psd_examples():
    assert is_psd(np.eye(3))
    assert not is_psd(np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(ValueError):
        is_psd(np.eye(2), tol=-1.0)


def test_generalized_eigenvalue_matches_scipy(rng):
    import scipy.linalg

    X = random_pd(rng, 5)
    Y = random_pd(rng, 5)
    expected = scipy.linalg.eigh(Y, X, eigvals_only=True)[0]
    assert min_generalized_eigenvalue(X, Y) == pytest.approx(expected, rel=1e-10)


@st.composite
def pd_and_subset(draw):
    n = draw(st.integers(2, 7))
    seed = draw(st.integers(0, 2**31))
    rng = np.random.default_rng(seed)
    M = random_pd(rng, n)
    S = sorted(draw(st.sets(st.integers(0, n - 1), min_size=1, max_size=n)))
    return M, np.array(S), rng


@given(pd_and_subset())
def test_restricted_solve_support_and_block_equation(case):
    M, S, rng = case
    g = rng.standard_normal(M.shape[0])
    h = restricted_solve(M, S, g)
    outside = np.setdiff1d(np.arange(M.shape[0]), S)
    assert np.all(h[outside] == 0)
    np.testing.assert_allclose((principal_submatrix(M, S) @ h)[S], g[S], atol=1e-10)


@given(pd_and_subset())
def test_submatrix_idempotent(case):
    M, S, _ = case
    MS = principal_submatrix(M, S)
    np.testing.assert_array_equal(principal_submatrix(MS, S), MS)


@given(pd_and_subset())
def test_smallest_eigenvalue_below_diagonal(case):
    M, _, _ = case
    assert smallest_eigenvalue(M) <= np.min(np.diag(M)) + 1e-12


@given(pd_and_subset())
def test_quadratic_form_identity(case):
    M, S, rng = case
    h = rng.standard_normal(M.shape[0])
    hS = np.zeros_like(h)
    hS[S] = h[S]
    assert hS @ M @ hS == pytest.approx(h @ principal_submatrix(M, S) @ h, rel=1e-12, abs=1e-12)


@given(pd_and_subset())
def test_block_inverse_is_pseudoinverse(case):
    M, S, _ = case
    MS = principal_submatrix(M, S)
    P = block_inverse(M, S)
    I_S = principal_submatrix(np.eye(M.shape[0]), S)
    np.testing.assert_allclose(P @ MS, I_S, atol=1e-9)
    np.testing.assert_allclose(MS @ P, I_S, atol=1e-9)
