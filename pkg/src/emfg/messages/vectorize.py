"""
Row-stack / column-stack vectorization and the Kronecker product.

The general-matrix multiplier message is a Gaussian over rvect(theta), so the
conversion between a parameter matrix and its flat vector must use one fixed
ordering everywhere (API, reports, and on-disk files): row-major.
"""

from __future__ import annotations

import numpy as np


def rvect(matrix: np.ndarray) -> np.ndarray:
    """
    Stack the rows of `matrix` into one vector.

    Usage example
    -------------
        rvect(np.array([[1, 2], [3, 4]]))  # array([1., 2., 3., 4.])
    """
    return np.asarray(matrix, dtype=float).reshape(-1, order="C")


def cvect(matrix: np.ndarray) -> np.ndarray:
    """
    Stack the columns of `matrix` into one vector.

    Usage example
    -------------
        cvect(np.array([[1, 2], [3, 4]]))  # array([1., 3., 2., 4.])
    """
    return np.atleast_2d(np.asarray(matrix, dtype=float)).reshape(-1, order="F")


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product of two matrices (scalars and vectors are promoted to 2-D)."""
    return np.kron(np.atleast_2d(np.asarray(a, dtype=float)), np.atleast_2d(np.asarray(b, dtype=float)))
