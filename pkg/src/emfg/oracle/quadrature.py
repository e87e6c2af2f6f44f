# ==================================================================================================
#                               EM message by quadrature
# ==================================================================================================
#
# Brute-force reference for the multiplier EM messages, built straight from the
# generic rule
#
#     eta(theta) = E[ log g(X, Y, theta) ],
#
# where the expectation is under the local posterior
#     p(x, y) ~ fwd_X(x) g(x, y, theta_hat) bwd_Y(y)
# and g is the node density N(y; A(theta) x, V_Z).
#
# The posterior is evaluated factor by factor on a tensor grid, normalized, and
# eta is computed at a set of probe points theta. A quadratic
#     -1/2 theta^T W theta + theta^T Wm + const
# is then fitted by least squares; eta is exactly quadratic, so the fit residual
# doubles as a structural check.
#
# For the autoregression node only Y_1 is noisy: the grid runs over (X, Y_1)
# and Y_2..Y_n are substituted as X_1..X_{n-1}.

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np

from emfg.config import as_float, as_int
from emfg.errors import DimensionMismatch, IllConditionedFit, InvalidConfig
from emfg.messages.gaussian import (
    DEFAULT_TOLERANCES,
    Gaussian,
    Tolerances,
    as_weight,
    inverse_spd,
)
from emfg.messages.multipliers import EmGaussian, MultiplierKind, MultiplierSpec, build_A

MAX_INTEGRATION_DIM: int = 4
MIN_POINTS_PER_DIM: int = 32
FIT_RESIDUAL_TOL: float = 1e-6


@dataclass(frozen=True, slots=True)
class QuadratureGrid:
    """
    Tensor grid placed in the whitened coordinates of the local posterior.

    Attributes
    ----------
    points_per_dim
        Grid points along each axis (>= 32).
    half_width_sigmas
        Half-width of the grid in posterior standard deviations.
    """

    points_per_dim: int = MIN_POINTS_PER_DIM
    half_width_sigmas: float = 8.0

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        """Check the grid size and width."""
        if self.points_per_dim < MIN_POINTS_PER_DIM:
            raise InvalidConfig(f"oracle.points_per_dim must be >= {MIN_POINTS_PER_DIM}, got {self.points_per_dim}")
        if not np.isfinite(self.half_width_sigmas) or self.half_width_sigmas <= 0:
            raise InvalidConfig(f"oracle.half_width_sigmas must be > 0, got {self.half_width_sigmas}")

    def nodes(self) -> np.ndarray:
        """One-dimensional node positions in standard deviations."""
        return np.linspace(-self.half_width_sigmas, self.half_width_sigmas, self.points_per_dim)

    @staticmethod
    def from_mapping(mapping: Mapping[str, Any] | None) -> QuadratureGrid:
        """Build a grid from the `oracle:` section."""
        mapping = mapping or {}
        return QuadratureGrid(
            points_per_dim=as_int(mapping, "points_per_dim", MIN_POINTS_PER_DIM, prefix="oracle"),
            half_width_sigmas=as_float(mapping, "half_width_sigmas", 8.0, prefix="oracle"),
        )


# ==================================================================================================
#                                   NODE GEOMETRY
# ==================================================================================================


@dataclass(frozen=True, slots=True, eq=False)
class _NodeLayout:
    """
    Linear maps from the integration variable v to the node quantities.

    x = x_map v, Y = y_map v, and the noisy residual is r(theta) = y_part v - A_rows(theta) x
    with weight `residual_weight`.
    """

    dim: int
    x_map: np.ndarray
    y_map: np.ndarray
    y_part: np.ndarray
    residual_weight: np.ndarray

    def residual_map(self, spec: MultiplierSpec, theta: Any) -> np.ndarray:
        A = build_A(spec, theta)
        if spec.kind is MultiplierKind.AUTOREGRESSION:
            A = A[:1, :]
        return self.y_part - A @ self.x_map


def _layout(spec: MultiplierSpec, tol: Tolerances) -> _NodeLayout:
    n, m = spec.n, spec.m
    if spec.kind is MultiplierKind.AUTOREGRESSION:
        dim = n + 1
        x_map = np.hstack([np.eye(n), np.zeros((n, 1))])
        y_map = np.zeros((n, dim))
        y_map[0, n] = 1.0
        y_map[1:, : n - 1] = np.eye(n - 1)
        y_part = y_map[:1, :]
        residual_weight = np.array([[1.0 / spec.sigma2]])
    else:
        dim = n + m
        x_map = np.hstack([np.eye(n), np.zeros((n, m))])
        y_map = np.hstack([np.zeros((m, n)), np.eye(m)])
        y_part = y_map
        residual_weight = spec.noise_weight(tol)
    if dim > MAX_INTEGRATION_DIM:
        raise DimensionMismatch(f"quadrature supports at most {MAX_INTEGRATION_DIM} dimensions, node needs {dim}")
    return _NodeLayout(dim=dim, x_map=x_map, y_map=y_map, y_part=y_part, residual_weight=residual_weight)


def _quadratic_log(points: np.ndarray, weight: np.ndarray, weighted_mean: np.ndarray) -> np.ndarray:
    """log of exp(-1/2 p^T W p + p^T Wm) for every row p."""
    return -0.5 * np.einsum("ij,jk,ik->i", points, weight, points) + points @ weighted_mean


# ==================================================================================================
#                                   QUADRATURE
# ==================================================================================================


def posterior_second_moment(
    spec: MultiplierSpec,
    theta_hat: Any,
    fwd_x: Gaussian,
    bwd_y: Gaussian,
    grid: QuadratureGrid,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> tuple[np.ndarray, np.ndarray]:
    """
    E[v] and E[v v^T] of the local posterior by tensor-grid quadrature.

    Returns the moments and is used by `em_message_quadrature`; exposed for
    tests of the grid itself.
    """
    layout = _layout(spec, tol)
    fwd_w = as_weight(fwd_x, tol)
    bwd_w = as_weight(bwd_y, tol)
    residual_at_hat = layout.residual_map(spec, theta_hat)

    # Grid placement only: any proper Gaussian covering the posterior works.
    precision = (
        layout.x_map.T @ fwd_w.weight @ layout.x_map
        + residual_at_hat.T @ layout.residual_weight @ residual_at_hat
        + layout.y_map.T @ bwd_w.weight @ layout.y_map
    )
    linear = layout.x_map.T @ fwd_w.weighted_mean + layout.y_map.T @ bwd_w.weighted_mean
    cov = inverse_spd(precision, tol, what="local posterior weight")
    center = cov @ linear
    scale = np.linalg.cholesky(cov)

    mesh = np.meshgrid(*([grid.nodes()] * layout.dim), indexing="ij")
    unit = np.stack([axis.ravel() for axis in mesh], axis=1)
    points = center + unit @ scale.T

    log_p = (
        _quadratic_log(points @ layout.x_map.T, fwd_w.weight, fwd_w.weighted_mean)
        - 0.5 * np.einsum(
            "ij,jk,ik->i",
            points @ residual_at_hat.T,
            layout.residual_weight,
            points @ residual_at_hat.T,
        )
        + _quadratic_log(points @ layout.y_map.T, bwd_w.weight, bwd_w.weighted_mean)
    )
    weights = np.exp(log_p - np.max(log_p))
    weights /= np.sum(weights)

    first = weights @ points
    second = (points * weights[:, None]).T @ points
    return first, second


def default_probes(theta_hat: Any, spec: MultiplierSpec, step: float = 1.0) -> list[np.ndarray]:
    """
    theta_hat, theta_hat +- step e_i and theta_hat + step (e_i + e_j) for i < j.

    That is exactly (d + 1)(d + 2) / 2 affinely rich points for a d-dimensional
    quadratic.
    """
    center = np.asarray(theta_hat, dtype=float).reshape(-1)
    if center.size != spec.param_dim:
        raise DimensionMismatch(f"theta_hat has {center.size} entries, node has {spec.param_dim} parameters")
    d = center.size
    eye = np.eye(d) * step
    probes = [center.copy()]
    probes += [center + eye[i] for i in range(d)]
    probes += [center - eye[i] for i in range(d)]
    probes += [center + eye[i] + eye[j] for i in range(d) for j in range(i + 1, d)]
    return probes


def _quadratic_features(theta: np.ndarray) -> np.ndarray:
    d = theta.size
    upper = [(-0.5 if i == j else -1.0) * theta[i] * theta[j] for i in range(d) for j in range(i, d)]
    return np.concatenate([upper, theta, [1.0]])


def fit_quadratic(probes: Sequence[np.ndarray], values: Sequence[float]) -> tuple[np.ndarray, np.ndarray, float]:
    """
    Least-squares fit of -1/2 theta^T W theta + theta^T Wm + c.

    Returns
    -------
    tuple
        (W, Wm, relative residual).
    """
    probes = [np.asarray(theta, dtype=float).reshape(-1) for theta in probes]
    d = probes[0].size
    needed = (d + 1) * (d + 2) // 2
    if len(probes) < needed:
        raise IllConditionedFit(f"{len(probes)} probes cannot determine a quadratic in {d} variables ({needed} needed)")
    design = np.vstack([_quadratic_features(theta) for theta in probes])
    target = np.asarray(values, dtype=float)
    coef, *_ = np.linalg.lstsq(design, target, rcond=None)
    if np.linalg.matrix_rank(design) < design.shape[1]:
        raise IllConditionedFit("probe set is not affinely rich enough for a quadratic fit")

    weight = np.zeros((d, d))
    position = 0
    for i in range(d):
        for j in range(i, d):
            weight[i, j] = weight[j, i] = coef[position]
            position += 1
    weighted_mean = coef[position : position + d]
    residual = float(np.max(np.abs(design @ coef - target)) / max(1.0, float(np.max(np.abs(target)))))
    return weight, weighted_mean, residual


def em_message_quadrature(
    spec: MultiplierSpec,
    theta_hat: Any,
    fwd_x: Gaussian,
    bwd_y: Gaussian,
    grid: QuadratureGrid | None = None,
    theta_probe: Sequence[np.ndarray] | None = None,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> EmGaussian:
    """
    Numeric EM message (W, Wm) over the flat parameter vector of the node.

    Raises
    ------
    IllConditionedFit
        If the quadratic fit residual exceeds 1e-6.

    Usage example
    -------------
        spec = MultiplierSpec.create("inner_product", n=1, noise=1.0)
        msg = em_message_quadrature(spec, [1.0], GaussianMoment([0.0], [[1.0]]), GaussianMoment([2.0], [[1.0]]))
    """
    grid = grid or QuadratureGrid()
    layout = _layout(spec, tol)
    _, second = posterior_second_moment(spec, theta_hat, fwd_x, bwd_y, grid, tol)
    probes = list(theta_probe) if theta_probe is not None else default_probes(theta_hat, spec)

    values = []
    for theta in probes:
        residual = layout.residual_map(spec, theta)
        # E[-1/2 r^T W r] for r = R v equals -1/2 tr(R^T W R E[v v^T]).
        values.append(-0.5 * float(np.sum((residual.T @ layout.residual_weight @ residual) * second)))

    weight, weighted_mean, residual = fit_quadratic(probes, values)
    if residual > FIT_RESIDUAL_TOL:
        raise IllConditionedFit(f"quadratic fit residual {residual:.3e} exceeds {FIT_RESIDUAL_TOL:.0e}")
    return EmGaussian(weight, weighted_mean)
