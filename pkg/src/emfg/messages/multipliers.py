# ==================================================================================================
#                               Multiplier-node EM messages
# ==================================================================================================
#
# Closed-form backward EM messages out of a multiplier node Y = A(theta) X + Z
# grouped with its Gaussian noise Z ~ N(0, V_Z), for the five tabulated shapes
# of A(theta):
#
#   inner_product         Y = theta^T X               (theta in R^n, Y scalar)
#   scalar_times_vector   Y = theta X                 (theta scalar, Y in R^n)
#   componentwise         Y = diag(theta) X           (theta in R^n, Y in R^n)
#   autoregression        Y = companion(theta) X      (theta in R^n, only Y_1 noisy)
#   general_matrix        Y = Theta X                 (Theta m x n, message over rvect)
#
# Every message is a (possibly degenerate) Gaussian in theta returned in weight
# form; the additive constant of eta(theta) is dropped.
#
# The messages consume the local posterior moments m_X, m_Y, V_X, V_{XY^T} of
# the node, computed by `marginals` from the incoming forward message on X and
# backward message on Y.

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass
from enum import Enum
from typing import Any, TypeAlias

import numpy as np

from emfg.config import as_float, as_int
from emfg.errors import DegenerateMessage, DimensionMismatch, InvalidConfig, SingularNoise, SingularSystem
from emfg.messages.gaussian import (
    DEFAULT_TOLERANCES,
    Gaussian,
    GaussianMoment,
    GaussianWeight,
    Tolerances,
    as_moment,
    as_weight,
    check_symmetric_psd,
    inverse_spd,
    propagate_affine,
    psd_project,
    solve_general,
    solve_spd,
    symmetrize,
)
from emfg.messages.vectorize import cvect, kron, rvect

# Backward EM message over theta: weight <- W_Theta, weighted_mean <- W_Theta m_Theta.
EmGaussian: TypeAlias = GaussianWeight


# ==================================================================================================
#                                   TYPES
# ==================================================================================================


class MultiplierKind(str, Enum):
    """The five tabulated multiplier shapes."""

    INNER_PRODUCT = "inner_product"
    SCALAR_TIMES_VECTOR = "scalar_times_vector"
    COMPONENTWISE = "componentwise"
    AUTOREGRESSION = "autoregression"
    GENERAL_MATRIX = "general_matrix"

    @classmethod
    def parse(cls, value: Any) -> MultiplierKind:
        """Accept an enum member or its string value."""
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError as exc:
            choices = ", ".join(kind.value for kind in cls)
            raise InvalidConfig(f"Unknown multiplier kind {value!r}; expected one of: {choices}") from exc


_SCALAR_NOISE_KINDS = frozenset({MultiplierKind.INNER_PRODUCT, MultiplierKind.AUTOREGRESSION})


@dataclass(frozen=True, slots=True, eq=False)
class MultiplierSpec:
    """
    One multiplier node grouped with its additive Gaussian noise.

    Attributes
    ----------
    kind
        Which shape A(theta) has.
    n
        Dimension of the input X.
    m
        Dimension of the output Y (1 for inner_product, n for the square kinds).
    noise
        sigma_Z^2 as a float, or the m x m covariance V_Z. A float given to a
        matrix kind means sigma_Z^2 I_m; for autoregression it means V_Z with
        only entry (1, 1) nonzero.

    Usage example
    -------------
        spec = MultiplierSpec.create("general_matrix", n=2, m=3, noise=0.5)
        spec.param_dim  # 6, the length of rvect(Theta)
    """

    kind: MultiplierKind
    n: int
    m: int
    noise: float | np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", MultiplierKind.parse(self.kind))
        if not isinstance(self.noise, (int, float)):
            noise = np.array(self.noise, dtype=float)
            if noise.ndim == 0:
                object.__setattr__(self, "noise", float(noise))
            else:
                noise.setflags(write=False)
                object.__setattr__(self, "noise", noise)
        else:
            object.__setattr__(self, "noise", float(self.noise))
        self.validate()

    @staticmethod
    def create(kind: MultiplierKind | str, *, n: int, m: int | None = None, noise: Any = 1.0) -> MultiplierSpec:
        """Build a spec, inferring m from the kind unless it is a general matrix."""
        kind = MultiplierKind.parse(kind)
        if m is None:
            if kind is MultiplierKind.GENERAL_MATRIX:
                raise DimensionMismatch("general_matrix needs an explicit output dimension m")
            m = 1 if kind is MultiplierKind.INNER_PRODUCT else n
        return MultiplierSpec(kind=kind, n=int(n), m=int(m), noise=noise)

    @staticmethod
    def from_mapping(mapping: Mapping[str, Any]) -> MultiplierSpec:
        """Build a spec from a raw mapping with keys `kind`, `n`, optional `m`, `noise`."""
        if "kind" not in mapping:
            raise InvalidConfig("multiplier.kind is required")
        raw_m = mapping.get("m")
        noise = mapping.get("noise", 1.0)
        if isinstance(noise, (int, float, str)):
            noise = as_float(mapping, "noise", 1.0, prefix="multiplier")
        return MultiplierSpec.create(
            mapping["kind"],
            n=as_int(mapping, "n", 1, prefix="multiplier"),
            m=None if raw_m is None else as_int(mapping, "m", 1, prefix="multiplier"),
            noise=noise,
        )

    def validate(self) -> None:
        """Check dimensions and noise shape against the kind."""
        if self.n < 1 or self.m < 1:
            raise DimensionMismatch(f"multiplier dimensions must be >= 1, got n={self.n}, m={self.m}")
        if self.kind is MultiplierKind.INNER_PRODUCT and self.m != 1:
            raise DimensionMismatch(f"inner_product has scalar output, got m={self.m}")
        if self.kind in (
            MultiplierKind.SCALAR_TIMES_VECTOR,
            MultiplierKind.COMPONENTWISE,
            MultiplierKind.AUTOREGRESSION,
        ) and self.m != self.n:
            raise DimensionMismatch(f"{self.kind.value} needs m == n, got n={self.n}, m={self.m}")

        if self.kind in _SCALAR_NOISE_KINDS:
            if not isinstance(self.noise, float):
                raise InvalidConfig(f"{self.kind.value} needs a scalar noise variance")
            if not np.isfinite(self.noise) or self.noise <= 0:
                raise InvalidConfig(f"{self.kind.value} noise variance must be > 0, got {self.noise}")
            return

        if isinstance(self.noise, float):
            if not np.isfinite(self.noise) or self.noise < 0:
                raise InvalidConfig(f"noise variance must be >= 0, got {self.noise}")
            return
        if self.noise.shape != (self.m, self.m):
            raise DimensionMismatch(f"noise covariance must be {self.m}x{self.m}, got {self.noise.shape}")
        try:
            check_symmetric_psd(self.noise, name="noise covariance")
        except ValueError as exc:
            if isinstance(exc, DimensionMismatch):
                raise
            raise InvalidConfig(str(exc)) from exc

    @property
    def param_dim(self) -> int:
        """Length of the flat parameter vector the EM message is over."""
        if self.kind is MultiplierKind.SCALAR_TIMES_VECTOR:
            return 1
        if self.kind is MultiplierKind.GENERAL_MATRIX:
            return self.m * self.n
        return self.n

    @property
    def sigma2(self) -> float:
        """Scalar noise variance of the inner_product and autoregression kinds."""
        if not isinstance(self.noise, float):
            raise DimensionMismatch(f"{self.kind.value} spec carries a noise matrix, not a scalar")
        return self.noise

    def noise_cov(self) -> np.ndarray:
        """The m x m noise covariance V_Z."""
        if isinstance(self.noise, np.ndarray):
            return np.array(self.noise)
        if self.kind is MultiplierKind.AUTOREGRESSION:
            cov = np.zeros((self.m, self.m))
            cov[0, 0] = self.noise
            return cov
        return self.noise * np.eye(self.m)

    def noise_weight(self, tol: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
        """W_Z = V_Z^-1; raises SingularNoise when V_Z is singular."""
        return inverse_spd(self.noise_cov(), tol, error=SingularNoise, what="noise covariance V_Z")


@dataclass(frozen=True, slots=True, eq=False)
class MultiplierMarginals:
    """
    Local posterior moments at a multiplier node.

    Attributes
    ----------
    m_x, m_y
        Posterior means of X (length n) and Y (length m).
    v_x
        Posterior covariance of X (n x n).
    v_xyt
        Posterior cross-covariance E[(X - m_x)(Y - m_y)^T] (n x m).
    """

    m_x: np.ndarray
    m_y: np.ndarray
    v_x: np.ndarray
    v_xyt: np.ndarray

    def __post_init__(self) -> None:
        m_x = np.atleast_1d(np.array(self.m_x, dtype=float))
        m_y = np.atleast_1d(np.array(self.m_y, dtype=float))
        v_x = np.atleast_2d(np.array(self.v_x, dtype=float))
        v_xyt = np.array(self.v_xyt, dtype=float).reshape(m_x.size, m_y.size)
        if v_x.shape != (m_x.size, m_x.size):
            raise DimensionMismatch(f"v_x shape {v_x.shape} does not match m_x dimension {m_x.size}")
        for name, value in (("m_x", m_x), ("m_y", m_y), ("v_x", v_x), ("v_xyt", v_xyt)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    def validate(self, tol: Tolerances = DEFAULT_TOLERANCES) -> MultiplierMarginals:
        """Check that v_x is symmetric PSD; return self."""
        check_symmetric_psd(self.v_x, tol, name="v_x")
        return self

    def second_moment_x(self) -> np.ndarray:
        """E[X X^T] = V_X + m_X m_X^T."""
        return self.v_x + np.outer(self.m_x, self.m_x)

    def cross_moment(self) -> np.ndarray:
        """E[X Y^T] = V_{XY^T} + m_X m_Y^T."""
        return self.v_xyt + np.outer(self.m_x, self.m_y)


# ==================================================================================================
#                                   PARAMETER LAYOUT
# ==================================================================================================


def _theta_array(spec: MultiplierSpec, theta: Any) -> np.ndarray:
    """Flat parameter vector of length spec.param_dim (matrices are taken by rvect)."""
    arr = np.asarray(theta, dtype=float)
    if spec.kind is MultiplierKind.GENERAL_MATRIX and arr.ndim == 2:
        if arr.shape != (spec.m, spec.n):
            raise DimensionMismatch(f"theta must be {spec.m}x{spec.n}, got {arr.shape}")
        return rvect(arr)
    flat = np.atleast_1d(arr).reshape(-1)
    if flat.size != spec.param_dim:
        raise DimensionMismatch(f"{spec.kind.value} expects {spec.param_dim} parameter(s), got {flat.size}")
    return flat


def unflatten_theta(spec: MultiplierSpec, vector: Any) -> np.ndarray:
    """Inverse of the flat layout: an m x n matrix for general_matrix, else the vector itself."""
    flat = _theta_array(spec, vector)
    if spec.kind is MultiplierKind.GENERAL_MATRIX:
        return flat.reshape(spec.m, spec.n)
    return flat


def companion(theta: np.ndarray) -> np.ndarray:
    """Companion matrix with theta^T as first row and a shifted identity below."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    n = theta.size
    matrix = np.zeros((n, n))
    matrix[0, :] = theta
    matrix[1:, :-1] = np.eye(n - 1)
    return matrix


def build_A(spec: MultiplierSpec, theta: Any) -> np.ndarray:
    """
    The m x n matrix A(theta) of the node.

    Usage example
    -------------
        build_A(MultiplierSpec.create("autoregression", n=3, noise=1.0), [0.5, -0.2, 0.1])
        # [[0.5, -0.2, 0.1], [1, 0, 0], [0, 1, 0]]
    """
    flat = _theta_array(spec, theta)
    match spec.kind:
        case MultiplierKind.INNER_PRODUCT:
            return flat.reshape(1, spec.n)
        case MultiplierKind.SCALAR_TIMES_VECTOR:
            return flat[0] * np.eye(spec.n)
        case MultiplierKind.COMPONENTWISE:
            return np.diag(flat)
        case MultiplierKind.AUTOREGRESSION:
            return companion(flat)
        case MultiplierKind.GENERAL_MATRIX:
            return flat.reshape(spec.m, spec.n)
    raise AssertionError(f"unhandled multiplier kind {spec.kind!r}")


# ==================================================================================================
#                                   MARGINALS
# ==================================================================================================


def _marginals_moment_path(
    A: np.ndarray,
    v_z: np.ndarray,
    fwd_x: GaussianMoment,
    fwd_wm: np.ndarray,
    bwd_y: GaussianMoment,
    tol: Tolerances,
) -> MultiplierMarginals:
    fwd_y = propagate_affine(fwd_x, A, v_z)
    through_noise = solve_spd(v_z + bwd_y.cov, bwd_y.mean, tol, error=SingularSystem, what="V_Z + bwd V_Y")
    w_tilde = inverse_spd(fwd_y.cov + bwd_y.cov, tol, error=SingularSystem, what="fwd V_Y + bwd V_Y")

    gain = fwd_x.cov @ A.T
    v_x = symmetrize(fwd_x.cov - gain @ w_tilde @ gain.T)
    v_xyt = gain @ w_tilde @ bwd_y.cov
    m_x = v_x @ (fwd_wm + A.T @ through_noise)
    m_y = fwd_y.mean + fwd_y.cov @ w_tilde @ (bwd_y.mean - fwd_y.mean)
    return MultiplierMarginals(m_x=m_x, m_y=m_y, v_x=psd_project(v_x, tol), v_xyt=v_xyt)


def _marginals_weight_path(
    A: np.ndarray,
    v_z: np.ndarray,
    fwd_x: GaussianMoment,
    bwd_y: GaussianWeight,
    tol: Tolerances,
) -> MultiplierMarginals:
    fwd_y = propagate_affine(fwd_x, A, v_z)
    gain = fwd_x.cov @ A.T
    residual = bwd_y.weighted_mean - bwd_y.weight @ fwd_y.mean
    # M = (I + W_Y V_Y)^-1, applied to [W_Y, r] in one solve.
    system = np.eye(fwd_y.dim) + bwd_y.weight @ fwd_y.cov
    solved = solve_general(system, np.column_stack([bwd_y.weight, residual, np.eye(fwd_y.dim)]), what="I + W_Y V_Y")
    m_w = solved[:, : fwd_y.dim]
    m_r = solved[:, fwd_y.dim]
    m_inv = solved[:, fwd_y.dim + 1 :]

    v_x = symmetrize(fwd_x.cov - gain @ m_w @ gain.T)
    v_xyt = gain @ m_inv
    m_x = fwd_x.mean + gain @ m_r
    m_y = fwd_y.mean + fwd_y.cov @ m_r
    return MultiplierMarginals(m_x=m_x, m_y=m_y, v_x=psd_project(v_x, tol), v_xyt=v_xyt)


def _marginals_information_path(
    A: np.ndarray,
    v_z: np.ndarray,
    fwd_x: GaussianWeight,
    bwd_y: GaussianWeight,
    tol: Tolerances,
) -> MultiplierMarginals:
    # Joint over (X, u) with Z = L u, u ~ N(0, I_r); only the posterior must be proper.
    eigenvalues, vectors = np.linalg.eigh(symmetrize(v_z))
    keep = eigenvalues > tol.tau_solve * max(float(eigenvalues[-1]), 0.0)
    factor = vectors[:, keep] * np.sqrt(eigenvalues[keep])
    T = np.hstack([A, factor])
    n = fwd_x.dim
    r = factor.shape[1]

    precision = np.zeros((n + r, n + r))
    precision[:n, :n] = fwd_x.weight
    precision[n:, n:] = np.eye(r)
    precision += T.T @ bwd_y.weight @ T
    linear = np.concatenate([fwd_x.weighted_mean, np.zeros(r)]) + T.T @ bwd_y.weighted_mean
    cov = inverse_spd(precision, tol, error=SingularSystem, what="joint posterior weight of (X, Z)")
    mean = cov @ linear

    v_x = symmetrize(cov[:n, :n])
    return MultiplierMarginals(
        m_x=mean[:n],
        m_y=T @ mean,
        v_x=psd_project(v_x, tol),
        v_xyt=cov[:n, :] @ T.T,
    )


def marginals(
    spec: MultiplierSpec,
    theta: Any,
    fwd_x: Gaussian,
    bwd_y: Gaussian,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> MultiplierMarginals:
    """
    Posterior moments of X and Y at the node, with theta plugged into A(theta).

    Parameters
    ----------
    spec
        The multiplier node.
    theta
        Current estimate of the node parameter.
    fwd_x
        Incoming message on X. A degenerate weight-form message is handled on
        the joint of X and the noise, provided the resulting posterior is
        proper.
    bwd_y
        Incoming message on Y. In moment form the classic formulas are used
        (V_Z + bwd V_Y and fwd V_Y + bwd V_Y must be invertible). In weight
        form the weight may be singular, including the all-zero message, and
        only I + W_Y fwd V_Y is solved.

    Returns
    -------
    MultiplierMarginals
        m_X, m_Y, V_X (PSD-projected) and V_{XY^T}.

    Raises
    ------
    SingularSystem
        If a required inverse fails.

    Usage example
    -------------
        spec = MultiplierSpec.create("inner_product", n=1, noise=1.0)
        marg = marginals(spec, [1.0], GaussianMoment([0.0], [[1.0]]), GaussianMoment([2.0], [[1.0]]))
        # m_x = 2/3, m_y = 4/3, v_x = 2/3, v_xyt = 1/3
    """
    A = build_A(spec, theta)
    if fwd_x.dim != spec.n:
        raise DimensionMismatch(f"fwd_x has dimension {fwd_x.dim}, node input has {spec.n}")
    if bwd_y.dim != spec.m:
        raise DimensionMismatch(f"bwd_y has dimension {bwd_y.dim}, node output has {spec.m}")

    v_z = spec.noise_cov()
    try:
        fwd_moment = as_moment(fwd_x, tol)
    except DegenerateMessage:
        assert isinstance(fwd_x, GaussianWeight)
        return _marginals_information_path(A, v_z, fwd_x, as_weight(bwd_y, tol), tol)
    if isinstance(bwd_y, GaussianMoment):
        fwd_wm = as_weight(fwd_x, tol).weighted_mean
        return _marginals_moment_path(A, v_z, fwd_moment, fwd_wm, bwd_y, tol)
    return _marginals_weight_path(A, v_z, fwd_moment, bwd_y, tol)


# ==================================================================================================
#                                   EM MESSAGES
# ==================================================================================================


def _check_marginals(spec: MultiplierSpec, marg: MultiplierMarginals) -> None:
    if marg.m_x.size != spec.n or marg.m_y.size != spec.m:
        raise DimensionMismatch(
            f"marginals over ({marg.m_x.size}, {marg.m_y.size}) do not match node ({spec.n}, {spec.m})"
        )


def em_message(
    spec: MultiplierSpec,
    marg: MultiplierMarginals,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> EmGaussian:
    """
    Backward EM message over theta for one of the five multiplier kinds.

    Raises
    ------
    SingularNoise
        If the kind needs W_Z = V_Z^-1 and V_Z is singular.

    Usage example
    -------------
        spec = MultiplierSpec.create("inner_product", n=1, noise=1.0)
        marg = MultiplierMarginals(m_x=[2.0], m_y=[3.0], v_x=[[1.0]], v_xyt=[[0.5]])
        em_message(spec, marg)  # weight 5, weighted_mean 6.5
    """
    _check_marginals(spec, marg)
    xx = marg.second_moment_x()
    xy = marg.cross_moment()

    match spec.kind:
        case MultiplierKind.INNER_PRODUCT | MultiplierKind.AUTOREGRESSION:
            # Only Y_1 depends on theta for the companion form.
            sigma2 = spec.sigma2
            weight = xx / sigma2
            weighted_mean = xy[:, 0] / sigma2
        case MultiplierKind.SCALAR_TIMES_VECTOR:
            w_z = spec.noise_weight(tol)
            weight = np.array([[np.trace(w_z @ marg.v_x) + marg.m_x @ w_z @ marg.m_x]])
            weighted_mean = np.array([np.trace(w_z @ marg.v_xyt) + marg.m_x @ w_z @ marg.m_y])
        case MultiplierKind.COMPONENTWISE:
            w_z = spec.noise_weight(tol)
            weight = w_z * xx
            weighted_mean = (w_z * xy) @ np.ones(spec.m)
        case MultiplierKind.GENERAL_MATRIX:
            w_z = spec.noise_weight(tol)
            weight = kron(w_z, xx)
            weighted_mean = kron(w_z, np.eye(spec.n)) @ cvect(xy)
        case _:
            raise AssertionError(f"unhandled multiplier kind {spec.kind!r}")

    return EmGaussian(symmetrize(weight), weighted_mean)


def em_message_fixed_y(
    fwd_x: Gaussian,
    m_s: float,
    sigma_s2: float,
    theta: Any,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> EmGaussian:
    """
    Backward EM message through S = theta^T X + noise with S observed as m_s.

    The local posterior of X has weight fwd W_X + theta theta^T / sigma_S^2 and
    weighted mean fwd W_X m_X + theta m_S / sigma_S^2; the message is then
    ((V_X + m_X m_X^T) / sigma_S^2, m_X m_S / sigma_S^2).

    Raises
    ------
    SingularSystem
        If the local posterior weight of X is singular.
    """
    if not np.isfinite(sigma_s2) or sigma_s2 <= 0:
        raise InvalidConfig(f"sigma_s2 must be > 0, got {sigma_s2}")
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    prior = as_weight(fwd_x, tol)
    if theta.size != prior.dim:
        raise DimensionMismatch(f"theta has {theta.size} entries, fwd_x has dimension {prior.dim}")

    local_weight = prior.weight + np.outer(theta, theta) / sigma_s2
    local_wm = prior.weighted_mean + theta * (float(m_s) / sigma_s2)
    v_x = inverse_spd(local_weight, tol, error=SingularSystem, what="local posterior weight of X")
    m_x = v_x @ local_wm
    return EmGaussian(symmetrize((v_x + np.outer(m_x, m_x)) / sigma_s2), m_x * (float(m_s) / sigma_s2))
