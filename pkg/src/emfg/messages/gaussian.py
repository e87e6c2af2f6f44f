"""
Gaussian sum-product messages and their elementary combination rules.

A Gaussian message is kept in one of two parameterizations:

- `GaussianMoment` (m, V): mean vector and covariance matrix.
- `GaussianWeight` (W, Wm): weight matrix W = V^-1 and weighted mean W m.

Degenerate messages (singular W, including the all-zero "uninformative"
message) exist only in weight form; moment form requires a positive definite
covariance. All values are immutable and every operation is a pure function.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy import linalg

from emfg.config import as_float
from emfg.constants import DEFAULT_TAU_PSD, DEFAULT_TAU_SOLVE, DEFAULT_TAU_SYM
from emfg.errors import (
    DegenerateMessage,
    DimensionMismatch,
    InvalidConfig,
    LinearAlgebraError,
    SingularCovariance,
    SingularSystem,
    UnidentifiableParameter,
)

# ==================================================================================================
#                                   TYPES
# ==================================================================================================


@dataclass(frozen=True, slots=True)
class Tolerances:
    """
    Numeric tolerances shared by all message operations.

    Attributes
    ----------
    tau_sym
        Symmetry tolerance (max absolute asymmetry, scaled by the matrix norm).
    tau_psd
        Eigenvalue floor: eigenvalues below -tau_psd violate PSD, and
        `psd_project` clamps to tau_psd.
    tau_solve
        A symmetric solve fails when its smallest eigenvalue is not larger than
        tau_solve times its largest eigenvalue.
    """

    tau_sym: float = DEFAULT_TAU_SYM
    tau_psd: float = DEFAULT_TAU_PSD
    tau_solve: float = DEFAULT_TAU_SOLVE

    def validate(self) -> None:
        """Require all tolerances finite and nonnegative."""
        for name in ("tau_sym", "tau_psd", "tau_solve"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise InvalidConfig(f"tolerances.{name} must be finite and >= 0, got {value!r}")

    @staticmethod
    def from_mapping(mapping: Mapping[str, Any] | None) -> Tolerances:
        """Build validated tolerances from a raw `tolerances:` mapping."""
        mapping = mapping or {}
        tol = Tolerances(
            tau_sym=as_float(mapping, "tau_sym", DEFAULT_TAU_SYM, prefix="tolerances"),
            tau_psd=as_float(mapping, "tau_psd", DEFAULT_TAU_PSD, prefix="tolerances"),
            tau_solve=as_float(mapping, "tau_solve", DEFAULT_TAU_SOLVE, prefix="tolerances"),
        )
        tol.validate()
        return tol


DEFAULT_TOLERANCES = Tolerances()


def _frozen(array: Any, *, ndim: int, name: str) -> np.ndarray:
    """Copy into a read-only float array of the requested rank."""
    out = np.array(array, dtype=float, ndmin=ndim)
    if out.ndim != ndim:
        raise DimensionMismatch(f"{name} must have {ndim} dimension(s), got shape {out.shape}")
    out.setflags(write=False)
    return out


@dataclass(frozen=True, slots=True, eq=False)
class GaussianMoment:
    """Gaussian message in moment form: mean vector and covariance matrix."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self) -> None:
        mean = _frozen(self.mean, ndim=1, name="mean")
        cov = _frozen(self.cov, ndim=2, name="cov")
        if cov.shape != (mean.size, mean.size):
            raise DimensionMismatch(f"cov shape {cov.shape} does not match mean dimension {mean.size}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        """Dimension of the underlying variable."""
        return int(self.mean.size)

    def validate(self, tol: Tolerances = DEFAULT_TOLERANCES) -> GaussianMoment:
        """Check symmetry and PSD of the covariance; return self for chaining."""
        check_symmetric_psd(self.cov, tol, name="cov")
        return self


@dataclass(frozen=True, slots=True, eq=False)
class GaussianWeight:
    """Gaussian message in weight form: W = V^-1 and Wm; W may be singular."""

    weight: np.ndarray
    weighted_mean: np.ndarray

    def __post_init__(self) -> None:
        weight = _frozen(self.weight, ndim=2, name="weight")
        weighted_mean = _frozen(self.weighted_mean, ndim=1, name="weighted_mean")
        if weight.shape != (weighted_mean.size, weighted_mean.size):
            raise DimensionMismatch(
                f"weight shape {weight.shape} does not match weighted_mean dimension {weighted_mean.size}"
            )
        object.__setattr__(self, "weight", weight)
        object.__setattr__(self, "weighted_mean", weighted_mean)

    @property
    def dim(self) -> int:
        """Dimension of the underlying variable."""
        return int(self.weighted_mean.size)

    def validate(self, tol: Tolerances = DEFAULT_TOLERANCES) -> GaussianWeight:
        """Check symmetry and PSD of the weight; return self for chaining."""
        check_symmetric_psd(self.weight, tol, name="weight")
        return self

    @staticmethod
    def uninformative(dim: int) -> GaussianWeight:
        """The zero-weight message, identity element of `combine_parallel`."""
        return GaussianWeight(np.zeros((dim, dim)), np.zeros(dim))


Gaussian = GaussianMoment | GaussianWeight


# ==================================================================================================
#                                   LINEAR ALGEBRA HELPERS
# ==================================================================================================


def symmetrize(matrix: np.ndarray) -> np.ndarray:
    """Return (M + M^T) / 2."""
    matrix = np.asarray(matrix, dtype=float)
    return 0.5 * (matrix + matrix.T)


def check_symmetric_psd(matrix: np.ndarray, tol: Tolerances = DEFAULT_TOLERANCES, *, name: str = "matrix") -> None:
    """
    Raise ValueError unless `matrix` is symmetric and PSD within tolerances.

    The eigenvalue floor is -tau_psd minus tau_sym times the matrix scale, so
    round-off of a valid PSD matrix does not trip the check when tau_psd = 0.
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {matrix.shape}")
    scale = max(1.0, float(np.max(np.abs(matrix))) if matrix.size else 1.0)
    if float(np.max(np.abs(matrix - matrix.T), initial=0.0)) > tol.tau_sym * scale:
        raise ValueError(f"{name} is not symmetric within tau_sym={tol.tau_sym}")
    eigenvalues = np.linalg.eigvalsh(symmetrize(matrix))
    if eigenvalues.size and eigenvalues[0] < -tol.tau_psd - tol.tau_sym * scale:
        raise ValueError(f"{name} is not positive semi-definite (min eigenvalue {eigenvalues[0]:.3e})")


def solve_spd(
    matrix: np.ndarray,
    rhs: np.ndarray,
    tol: Tolerances = DEFAULT_TOLERANCES,
    *,
    error: type[LinearAlgebraError] = SingularSystem,
    what: str = "matrix",
) -> np.ndarray:
    """
    Solve M x = rhs for symmetric positive definite M.

    Fails with `error` when the smallest eigenvalue of M is not larger than
    tau_solve times its largest eigenvalue.
    """
    sym = symmetrize(matrix)
    eigenvalues, vectors = np.linalg.eigh(sym)
    if eigenvalues.size == 0:
        return np.asarray(rhs, dtype=float)
    largest = float(eigenvalues[-1])
    if largest <= 0.0 or float(eigenvalues[0]) <= tol.tau_solve * largest:
        raise error(
            f"{what} is not positive definite within tau_solve={tol.tau_solve} "
            f"(eigenvalues {float(eigenvalues[0]):.3e} .. {largest:.3e})"
        )
    rhs = np.asarray(rhs, dtype=float)
    projected = vectors.T @ rhs
    scaled = projected / (eigenvalues[:, None] if projected.ndim == 2 else eigenvalues)
    return vectors @ scaled


def inverse_spd(
    matrix: np.ndarray,
    tol: Tolerances = DEFAULT_TOLERANCES,
    *,
    error: type[LinearAlgebraError] = SingularSystem,
    what: str = "matrix",
) -> np.ndarray:
    """Inverse of a symmetric positive definite matrix, returned symmetrized."""
    matrix = np.asarray(matrix, dtype=float)
    return symmetrize(solve_spd(matrix, np.eye(matrix.shape[0]), tol, error=error, what=what))


def solve_general(
    matrix: np.ndarray,
    rhs: np.ndarray,
    *,
    error: type[LinearAlgebraError] = SingularSystem,
    what: str = "matrix",
) -> np.ndarray:
    """Solve a square, not necessarily symmetric, system with an LU factorization."""
    try:
        solution = linalg.solve(np.asarray(matrix, dtype=float), np.asarray(rhs, dtype=float), check_finite=False)
    except (linalg.LinAlgError, ValueError) as exc:
        raise error(f"{what} is singular: {exc}") from exc
    if not np.all(np.isfinite(solution)):
        raise error(f"{what} produced a non-finite solution")
    return solution


def _require_same_dim(a: Gaussian, b: Gaussian) -> None:
    if a.dim != b.dim:
        raise DimensionMismatch(f"message dimensions differ: {a.dim} vs {b.dim}")


# ==================================================================================================
#                                   OPERATIONS
# ==================================================================================================


def to_weight(g: GaussianMoment, tol: Tolerances = DEFAULT_TOLERANCES) -> GaussianWeight:
    """
    Convert a moment-form message to weight form.

    Raises
    ------
    SingularCovariance
        If the covariance is not positive definite within tau_solve.

    Usage example
    -------------
        to_weight(GaussianMoment([2.0], [[4.0]]))  # W = 0.25, Wm = 0.5
    """
    weight = inverse_spd(g.cov, tol, error=SingularCovariance, what="covariance")
    return GaussianWeight(weight, weight @ g.mean)


def to_moment(g: GaussianWeight, tol: Tolerances = DEFAULT_TOLERANCES) -> GaussianMoment:
    """
    Convert a weight-form message to moment form.

    Raises
    ------
    DegenerateMessage
        If the weight matrix is singular; such messages must stay in weight form.
    """
    cov = inverse_spd(g.weight, tol, error=DegenerateMessage, what="weight matrix")
    return GaussianMoment(cov @ g.weighted_mean, cov)


def as_weight(g: Gaussian, tol: Tolerances = DEFAULT_TOLERANCES) -> GaussianWeight:
    """Return `g` in weight form, converting moment messages."""
    return g if isinstance(g, GaussianWeight) else to_weight(g, tol)


def as_moment(g: Gaussian, tol: Tolerances = DEFAULT_TOLERANCES) -> GaussianMoment:
    """Return `g` in moment form, converting weight messages."""
    return g if isinstance(g, GaussianMoment) else to_moment(g, tol)


def combine_parallel(a: GaussianWeight, b: GaussianWeight) -> GaussianWeight:
    """
    Equality-node product of two Gaussian messages: weights and weighted means add.

    Usage example
    -------------
        combine_parallel(GaussianWeight([[1.0]], [0.0]), GaussianWeight([[1.0]], [2.0]))
        # W = 2, Wm = 2, i.e. mean 1
    """
    _require_same_dim(a, b)
    return GaussianWeight(a.weight + b.weight, a.weighted_mean + b.weighted_mean)


def propagate_affine(g: GaussianMoment, A: np.ndarray, v_add: np.ndarray) -> GaussianMoment:
    """
    Forward message through Y = A X + Z with Z ~ N(0, v_add).

    Returns mean A m and covariance A V A^T + v_add, symmetrized.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    v_add = np.atleast_2d(np.asarray(v_add, dtype=float))
    if A.shape[1] != g.dim:
        raise DimensionMismatch(f"A has {A.shape[1]} columns but the message has dimension {g.dim}")
    if v_add.shape != (A.shape[0], A.shape[0]):
        raise DimensionMismatch(f"v_add shape {v_add.shape} does not match output dimension {A.shape[0]}")
    return GaussianMoment(A @ g.mean, symmetrize(A @ g.cov @ A.T + v_add))


def backward_through_matrix(g: GaussianWeight, A: np.ndarray) -> GaussianWeight:
    """Backward message through Y = A X given a weight-form message on Y: (A^T W A, A^T Wm)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[0] != g.dim:
        raise DimensionMismatch(f"A has {A.shape[0]} rows but the message has dimension {g.dim}")
    return GaussianWeight(symmetrize(A.T @ g.weight @ A), A.T @ g.weighted_mean)


def add_noise_weight(g: GaussianWeight, v_add: np.ndarray) -> GaussianWeight:
    """
    Message through an adder with independent N(0, v_add) noise, in weight form.

    W' = (I + W V)^-1 W and Wm' = (I + W V)^-1 Wm. Both W and V may be
    singular: I + W V is always invertible for PSD W, V.
    """
    v_add = np.atleast_2d(np.asarray(v_add, dtype=float))
    if v_add.shape != (g.dim, g.dim):
        raise DimensionMismatch(f"v_add shape {v_add.shape} does not match message dimension {g.dim}")
    system = np.eye(g.dim) + g.weight @ v_add
    solved = solve_general(system, np.column_stack([g.weight, g.weighted_mean]), what="I + W V")
    return GaussianWeight(symmetrize(solved[:, :-1]), solved[:, -1])


def argmax(g: GaussianWeight, tol: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """
    Maximizer of a Gaussian message, i.e. the solution of W theta = Wm.

    Raises
    ------
    UnidentifiableParameter
        If W is singular within tau_solve.
    """
    return solve_spd(g.weight, g.weighted_mean, tol, error=UnidentifiableParameter, what="combined parameter weight")


def psd_project(matrix: np.ndarray, tol: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """
    Symmetrize and clamp eigenvalues below tau_psd up to tau_psd.

    Already-PSD input is returned symmetrized but otherwise untouched.
    """
    sym = symmetrize(matrix)
    if sym.shape[0] != sym.shape[1]:
        raise DimensionMismatch(f"psd_project needs a square matrix, got shape {sym.shape}")
    eigenvalues, vectors = np.linalg.eigh(sym)
    if eigenvalues.size == 0 or eigenvalues[0] >= tol.tau_psd:
        return sym
    clamped = np.maximum(eigenvalues, tol.tau_psd)
    return symmetrize((vectors * clamped) @ vectors.T)


def combine_moment_weight(
    fwd: Gaussian,
    bwd: GaussianWeight,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> GaussianMoment:
    """Posterior at an equality node from two opposite messages, in moment form."""
    _require_same_dim(fwd, bwd)
    if isinstance(fwd, GaussianMoment):
        # Information-free update keeps a PD forward covariance usable with any bwd weight.
        system = np.eye(fwd.dim) + bwd.weight @ fwd.cov
        gain = solve_general(system.T, fwd.cov.T, what="I + W_bwd V_fwd").T
        cov = symmetrize(gain)
        mean = fwd.mean + cov @ (bwd.weighted_mean - bwd.weight @ fwd.mean)
        return GaussianMoment(mean, cov)
    return to_moment(combine_parallel(fwd, bwd), tol)


def log_density(g: GaussianMoment, x: np.ndarray, tol: Tolerances = DEFAULT_TOLERANCES) -> float:
    """log N(x; m, V) for a moment message with PD covariance."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.size != g.dim:
        raise DimensionMismatch(f"point dimension {x.size} does not match message dimension {g.dim}")
    residual = x - g.mean
    solved = solve_spd(g.cov, residual, tol, error=SingularCovariance, what="covariance")
    _, logdet = np.linalg.slogdet(g.cov)
    return float(-0.5 * (g.dim * np.log(2.0 * np.pi) + logdet + residual @ solved))
