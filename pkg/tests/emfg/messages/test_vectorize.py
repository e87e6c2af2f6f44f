"""Tests for matrix vectorization and the Kronecker product."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from emfg.messages.vectorize import cvect, kron, rvect


def test_row_and_column_stacking() -> None:
    """rvect stacks rows, cvect stacks columns."""
    matrix = np.array([[1, 2], [3, 4]])

    assert_allclose(rvect(matrix), [1.0, 2.0, 3.0, 4.0])
    assert_allclose(cvect(matrix), [1.0, 3.0, 2.0, 4.0])
    assert_allclose(rvect(matrix), cvect(matrix.T))


def test_kron_vec_identity(rng) -> None:
    """cvect(A X B) = (B^T kron A) cvect(X)."""
    A = rng.normal(size=(2, 3))
    X = rng.normal(size=(3, 4))
    B = rng.normal(size=(4, 2))

    assert_allclose(cvect(A @ X @ B), kron(B.T, A) @ cvect(X), atol=1e-12)


def test_kron_promotes_scalars_and_vectors() -> None:
    """Scalars and 1-D inputs are treated as matrices."""
    assert kron(2.0, np.eye(2)).shape == (2, 2)
    assert_allclose(kron(2.0, np.eye(2)), 2.0 * np.eye(2))
    assert kron(np.ones(3), np.eye(2)).shape == (2, 6)


@settings(max_examples=50, deadline=None)
@given(rows=st.integers(1, 4), cols=st.integers(1, 4), seed=st.integers(0, 2**32 - 1))
def test_row_stacking_is_column_stacking_of_the_transpose(rows: int, cols: int, seed: int) -> None:
    """Row-major stacking inverts reshape and matches column stacking of the transpose."""
    matrix = np.random.default_rng(seed).normal(size=(rows, cols))

    assert_allclose(rvect(matrix), cvect(matrix.T))
    assert_allclose(rvect(matrix).reshape(rows, cols), matrix)


@settings(max_examples=50, deadline=None)
@given(n=st.integers(1, 3), m=st.integers(1, 3), seed=st.integers(0, 2**32 - 1))
def test_quadratic_form_through_kron(n: int, m: int, seed: int) -> None:
    """(A x)^T W (A x) = rvect(A) (W kron x x^T) rvect(A)^T."""
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(m, n))
    W = np.eye(m) + np.diag(rng.uniform(0.0, 1.0, size=m))
    x = rng.normal(size=n)

    direct = (A @ x) @ W @ (A @ x)
    assert_allclose(rvect(A) @ kron(W, np.outer(x, x)) @ rvect(A), direct, rtol=1e-12, atol=1e-12)
