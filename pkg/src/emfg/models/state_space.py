"""
Sum-product sweeps, simulation and exact log-likelihood for the linear models.

Both models share the state recursion

    X_k = A X_{k-1} + b U_k,      Y_k = c^T X_k + Z_k,      k = 1..N,

with U_k ~ N(0, sigma_U^2), Z_k ~ N(0, sigma_Z^2) and b = e_1:

- FIR: A is the fixed shift matrix, so X_k = (U_k, ..., U_{k-n+1}), and c = theta.
- AR: A = companion(theta) and c = e_1.

Message conventions along X_0..X_N:

- `fwd[k]` is the filtered message (includes y_1..y_k). It is a
  `GaussianMoment` once positive definite and a `GaussianWeight` before that,
  which only happens with a (partially) uninformative X_0 prior.
- `pred[k]` is the one-step prediction of X_k (includes y_1..y_{k-1}).
- `bwd[k]` is the backward message in weight form (includes y_{k+1}..y_N);
  `bwd[N]` is the zero message.

log p(y | theta) is the innovations sum. When the X_0 prior has flat directions
it is the diffuse likelihood, which stays comparable across theta.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg, stats

from emfg.errors import DegenerateMessage, DimensionMismatch
from emfg.messages.gaussian import (
    DEFAULT_TOLERANCES,
    Gaussian,
    GaussianMoment,
    GaussianWeight,
    Tolerances,
    add_noise_weight,
    backward_through_matrix,
    combine_moment_weight,
    combine_parallel,
    propagate_affine,
    symmetrize,
    to_moment,
)
from emfg.messages.multipliers import companion
from emfg.models.config import LinearModel, ModelKind

LOGGER = logging.getLogger(__name__)


# ==================================================================================================
#                                   TYPES
# ==================================================================================================


@dataclass(frozen=True, slots=True, eq=False)
class Observations:
    """Observed outputs y_1..y_N."""

    y: np.ndarray

    def __post_init__(self) -> None:
        y = np.atleast_1d(np.array(self.y, dtype=float))
        if y.ndim != 1:
            raise DimensionMismatch(f"observations must be a vector, got shape {y.shape}")
        if not np.all(np.isfinite(y)):
            raise ValueError("observations must all be finite")
        y.setflags(write=False)
        object.__setattr__(self, "y", y)

    def __len__(self) -> int:
        return int(self.y.size)


@dataclass(frozen=True, slots=True)
class Innovation:
    """One-step predictive mean and variance of y_k."""

    mean: float
    var: float


@dataclass(frozen=True, slots=True, eq=False)
class SweepResult:
    """
    Forward and backward state messages of one sum-product sweep.

    Attributes
    ----------
    fwd
        N + 1 filtered messages on X_0..X_N.
    pred
        N + 1 predicted messages; `pred[0]` is the X_0 prior.
    bwd
        N + 1 backward weight messages.
    innovations
        N entries for y_1..y_N; None where the prediction is still diffuse.
    observations
        The outputs the sweep was run on.
    loglik
        log p(y | theta) at the plugged-in theta, diffuse when the X_0 prior is.
    """

    fwd: tuple[Gaussian, ...]
    pred: tuple[Gaussian, ...]
    bwd: tuple[GaussianWeight, ...]
    innovations: tuple[Innovation | None, ...]
    observations: Observations
    loglik: float

    def posterior(self, k: int, tol: Tolerances = DEFAULT_TOLERANCES) -> GaussianMoment:
        """Smoothed posterior of X_k given all observations."""
        return combine_moment_weight(self.fwd[k], self.bwd[k], tol)

    def log_likelihood(self) -> float:
        """log p(y | theta) of the sweep, see `log_likelihood`."""
        return self.loglik


@dataclass(frozen=True, slots=True, eq=False)
class Simulation:
    """Simulated dataset with its latent signals."""

    observations: Observations
    states: np.ndarray
    inputs: np.ndarray


# ==================================================================================================
#                                   MODEL MATRICES
# ==================================================================================================


def shift_matrix(order: int) -> np.ndarray:
    """n x n matrix with ones on the first subdiagonal."""
    return np.eye(order, k=-1)


def transition(model: LinearModel, theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """State transition (A, b) of the model with theta plugged in."""
    theta = _theta_vector(model, theta)
    b = np.zeros(model.order)
    b[0] = 1.0
    if model.kind is ModelKind.AR:
        return companion(theta), b
    return shift_matrix(model.order), b


def output_vector(model: LinearModel, theta: np.ndarray) -> np.ndarray:
    """Output vector c: theta for FIR, e_1 for AR."""
    theta = _theta_vector(model, theta)
    if model.kind is ModelKind.FIR:
        return theta.copy()
    c = np.zeros(model.order)
    c[0] = 1.0
    return c


def observation_weight(model: LinearModel, theta: np.ndarray, y_k: float) -> GaussianWeight:
    """Message on X_k from observing y_k: (c c^T / sigma_Z^2, c y_k / sigma_Z^2)."""
    c = output_vector(model, theta)
    return GaussianWeight(np.outer(c, c) / model.sigma_z2, c * (float(y_k) / model.sigma_z2))


def _theta_vector(model: LinearModel, theta: np.ndarray) -> np.ndarray:
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if theta.shape != (model.order,):
        raise DimensionMismatch(f"theta must have {model.order} entries, got shape {theta.shape}")
    return theta


def settle(g: GaussianWeight, tol: Tolerances = DEFAULT_TOLERANCES) -> Gaussian:
    """Moment form when the weight is positive definite, otherwise unchanged."""
    try:
        return to_moment(g, tol)
    except DegenerateMessage:
        return g


# ==================================================================================================
#                                   SINGLE-SECTION PRIMITIVES
# ==================================================================================================


def predict_weight(g: GaussianWeight, A: np.ndarray, b: np.ndarray, sigma_u2: float) -> GaussianWeight:
    """
    Weight-form message on A X + b U from a (possibly degenerate) message on X.

    The pair (X, U) is marginalized over the null space of T = [A b], which
    needs no inverse of A. T has full row rank for both models since b = e_1
    and the rows of A below the first are a shifted identity.
    """
    T = np.column_stack([A, b])
    w_z = linalg.block_diag(g.weight, np.array([[1.0 / sigma_u2]]))
    wm_z = np.append(g.weighted_mean, 0.0)
    t_pinv = linalg.pinv(T)
    null = linalg.null_space(T)
    w_null = w_z @ null
    fiber_pinv = linalg.pinv(null.T @ w_null)
    reduced_w = w_z - w_null @ fiber_pinv @ w_null.T
    reduced_wm = wm_z - w_null @ fiber_pinv @ (null.T @ wm_z)
    weight = symmetrize(t_pinv.T @ reduced_w @ t_pinv)
    return GaussianWeight(weight, t_pinv.T @ reduced_wm)


def predict(model: LinearModel, theta: np.ndarray, g: Gaussian, tol: Tolerances = DEFAULT_TOLERANCES) -> Gaussian:
    """One-step prediction of X_k from the filtered message on X_{k-1}."""
    A, b = transition(model, theta)
    if isinstance(g, GaussianMoment):
        return propagate_affine(g, A, model.sigma_u2 * np.outer(b, b))
    return settle(predict_weight(g, A, b, model.sigma_u2), tol)


def forward_step(
    model: LinearModel,
    theta: np.ndarray,
    filtered_prev: Gaussian,
    y_k: float,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> tuple[Gaussian, Gaussian, Innovation | None]:
    """
    One forward section: predict X_k, then fold in the observation y_k.

    Returns
    -------
    tuple
        (predicted, filtered, innovation); the innovation is None when the
        prediction is still degenerate.
    """
    predicted = predict(model, theta, filtered_prev, tol)
    c = output_vector(model, theta)
    if isinstance(predicted, GaussianMoment):
        v_c = predicted.cov @ c
        y_hat = float(c @ predicted.mean)
        s = float(c @ v_c) + model.sigma_z2
        gain = v_c / s
        filtered = GaussianMoment(
            predicted.mean + gain * (float(y_k) - y_hat),
            symmetrize(predicted.cov - np.outer(gain, v_c)),
        )
        return predicted, filtered, Innovation(mean=y_hat, var=s)
    updated = combine_parallel(predicted, observation_weight(model, theta, y_k))
    return predicted, settle(updated, tol), None


def backward_step(
    model: LinearModel,
    theta: np.ndarray,
    bwd_k: GaussianWeight,
    y_k: float,
) -> GaussianWeight:
    """Backward message on X_{k-1} from the one on X_k and the observation y_k."""
    A, b = transition(model, theta)
    with_obs = combine_parallel(bwd_k, observation_weight(model, theta, y_k))
    through_input = add_noise_weight(with_obs, model.sigma_u2 * np.outer(b, b))
    return backward_through_matrix(through_input, A)


# ==================================================================================================
#                                   SWEEPS
# ==================================================================================================


def _check_lengths(model: LinearModel, y: Observations) -> None:
    if len(y) != model.length:
        raise DimensionMismatch(f"model.length is {model.length} but {len(y)} observations were given")


def forward_pass(
    model: LinearModel,
    theta: np.ndarray,
    y: Observations,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> tuple[tuple[Gaussian, ...], tuple[Gaussian, ...], tuple[Innovation | None, ...]]:
    """Filtered messages, predictions and innovations for X_0..X_N."""
    _check_lengths(model, y)
    theta = _theta_vector(model, theta)
    start = settle(model.prior, tol)
    fwd: list[Gaussian] = [start]
    pred: list[Gaussian] = [start]
    innovations: list[Innovation | None] = []
    for y_k in y.y:
        predicted, filtered, innovation = forward_step(model, theta, fwd[-1], float(y_k), tol)
        pred.append(predicted)
        fwd.append(filtered)
        innovations.append(innovation)
    return tuple(fwd), tuple(pred), tuple(innovations)


def backward_pass(model: LinearModel, theta: np.ndarray, y: Observations) -> tuple[GaussianWeight, ...]:
    """Backward weight messages on X_0..X_N, starting from the zero message at X_N."""
    _check_lengths(model, y)
    theta = _theta_vector(model, theta)
    bwd: list[GaussianWeight] = [GaussianWeight.uninformative(model.order)]
    for y_k in y.y[::-1]:
        bwd.append(backward_step(model, theta, bwd[-1], float(y_k)))
    return tuple(reversed(bwd))


def sweep(
    model: LinearModel,
    theta: np.ndarray,
    y: Observations,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> SweepResult:
    """
    Forward-backward sum-product sweep with theta plugged into every section.

    Usage example
    -------------
        result = sweep(model, np.zeros(model.order), observations)
        smoothed = result.posterior(1)
    """
    fwd, pred, innovations = forward_pass(model, theta, y, tol)
    bwd = backward_pass(model, theta, y)
    return SweepResult(
        fwd=fwd,
        pred=pred,
        bwd=bwd,
        innovations=innovations,
        observations=y,
        loglik=_resolve_log_likelihood(model, theta, y, innovations, tol),
    )


def innovations_log_likelihood(innovations: tuple[Innovation | None, ...], y: np.ndarray) -> float:
    """
    Sum of log N(y_k; y_hat_k, s_k).

    Raises
    ------
    DegenerateMessage
        If a step has no innovation; use `diffuse_log_likelihood` then.
    """
    steps = [item for item in innovations if item is not None]
    if len(steps) != len(innovations):
        raise DegenerateMessage("a diffuse step has no innovation; the likelihood must be computed as diffuse")
    if not steps:
        return 0.0
    means = np.array([item.mean for item in steps])
    scales = np.sqrt(np.array([item.var for item in steps]))
    return float(np.sum(stats.norm.logpdf(np.asarray(y, dtype=float), loc=means, scale=scales)))


def split_prior(prior: GaussianWeight, tol: Tolerances = DEFAULT_TOLERANCES) -> tuple[GaussianMoment, np.ndarray]:
    """
    Split an X_0 prior into its proper part and the basis of its flat directions.

    Eigenvalues of the weight at or below tau_solve times the largest one
    span the flat directions. The proper part is the moment-form message on
    the complement; its covariance is zero along the flat basis.

    Returns
    -------
    tuple
        (proper, basis) with `basis` of shape (n, d), d the number of flat directions.
    """
    eigenvalues, vectors = np.linalg.eigh(symmetrize(prior.weight))
    largest = float(eigenvalues[-1])
    flat = eigenvalues <= tol.tau_solve * largest if largest > 0 else np.ones(eigenvalues.size, dtype=bool)
    kept = vectors[:, ~flat]
    cov = symmetrize((kept / eigenvalues[~flat]) @ kept.T)
    return GaussianMoment(cov @ prior.weighted_mean, cov), vectors[:, flat]


def _pseudo_inverse_and_log_det(matrix: np.ndarray, tol: Tolerances) -> tuple[np.ndarray, float]:
    if matrix.size == 0:
        return matrix, 0.0
    eigenvalues, vectors = np.linalg.eigh(symmetrize(matrix))
    largest = float(eigenvalues[-1])
    if largest <= 0.0:
        return np.zeros_like(matrix), 0.0
    keep = eigenvalues > tol.tau_solve * largest
    kept = vectors[:, keep]
    return (kept / eigenvalues[keep]) @ kept.T, float(np.sum(np.log(eigenvalues[keep])))


def diffuse_log_likelihood(
    model: LinearModel,
    theta: np.ndarray,
    y: Observations,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> float:
    """
    log p(y | theta) with the flat directions of the X_0 prior treated as diffuse.

    X_0 is written as the proper part of the prior plus B delta, with B the
    flat basis and delta ~ N(0, kappa I). A Kalman filter conditioned on delta
    carries the regression of the state on delta along with the usual mean
    and covariance. With e_k, s_k the innovations at delta = 0 and h_k the
    regression of y_k on delta,

        S = sum_k h_k h_k^T / s_k,      q = sum_k h_k e_k / s_k,

    and the returned value is

        sum_k log N(e_k; 0, s_k) + q^T S^+ q / 2 - log pdet(S) / 2,

    the limit of log p_kappa(y | theta) + rank(S) log(kappa) / 2 as kappa grows.
    Differences between two theta with the same rank of S are differences of
    the proper-prior log-likelihood in that limit. With no flat direction the
    value is the ordinary innovations log-likelihood.

    Usage example
    -------------
        loglik = diffuse_log_likelihood(model, theta, observations)
    """
    _check_lengths(model, y)
    theta = _theta_vector(model, theta)
    A, b = transition(model, theta)
    c = output_vector(model, theta)
    proper, basis = split_prior(model.prior, tol)

    mean, cov = proper.mean, proper.cov
    flat = basis.shape[1]
    S = np.zeros((flat, flat))
    q = np.zeros(flat)
    errors = np.empty(len(y))
    variances = np.empty(len(y))
    for k, y_k in enumerate(y.y):
        mean = A @ mean
        basis = A @ basis
        cov = symmetrize(A @ cov @ A.T + model.sigma_u2 * np.outer(b, b))

        v_c = cov @ c
        s = float(c @ v_c) + model.sigma_z2
        e = float(y_k) - float(c @ mean)
        h = basis.T @ c
        S += np.outer(h, h) / s
        q += h * (e / s)
        errors[k], variances[k] = e, s

        gain = v_c / s
        mean = mean + gain * e
        basis = basis - np.outer(gain, h)
        cov = symmetrize(cov - np.outer(gain, v_c))

    S_pinv, log_pdet = _pseudo_inverse_and_log_det(S, tol)
    LOGGER.debug("Diffuse likelihood | flat directions=%d | N=%d", flat, len(y))
    proper_part = float(np.sum(stats.norm.logpdf(errors, scale=np.sqrt(variances))))
    return proper_part + 0.5 * float(q @ S_pinv @ q) - 0.5 * log_pdet


def _resolve_log_likelihood(
    model: LinearModel,
    theta: np.ndarray,
    y: Observations,
    innovations: tuple[Innovation | None, ...],
    tol: Tolerances,
) -> float:
    if all(item is not None for item in innovations):
        return innovations_log_likelihood(innovations, y.y)
    return diffuse_log_likelihood(model, theta, y, tol)


def log_likelihood(
    model: LinearModel,
    theta: np.ndarray,
    y: Observations,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> float:
    """
    Exact log p(y | theta) from the innovations of a forward pass.

    When some prediction is diffuse (flat directions in the X_0 prior) the
    value is `diffuse_log_likelihood`, which is comparable across theta.
    """
    _, _, innovations = forward_pass(model, theta, y, tol)
    return _resolve_log_likelihood(model, theta, y, innovations, tol)


# ==================================================================================================
#                                   SIMULATION
# ==================================================================================================


def simulate(model: LinearModel, theta_true: np.ndarray, seed: int) -> Simulation:
    """
    Draw one dataset from the model; deterministic given `seed`.

    X_0 is drawn from the prior when its weight is positive definite and set
    to zero otherwise.
    """
    theta_true = _theta_vector(model, theta_true)
    rng = np.random.default_rng(seed)
    A, b = transition(model, theta_true)
    c = output_vector(model, theta_true)

    prior = settle(model.prior)
    if isinstance(prior, GaussianMoment):
        x = rng.multivariate_normal(prior.mean, prior.cov)
    else:
        x = np.zeros(model.order)

    inputs = rng.normal(0.0, np.sqrt(model.sigma_u2), size=model.length)
    noise = rng.normal(0.0, np.sqrt(model.sigma_z2), size=model.length)
    states = np.empty((model.length + 1, model.order))
    states[0] = x
    y = np.empty(model.length)
    for k in range(model.length):
        x = A @ x + b * inputs[k]
        states[k + 1] = x
        y[k] = c @ x + noise[k]
    LOGGER.debug("Simulated %s model | order=%d | length=%d | seed=%d", model.kind.value, model.order, model.length, seed)
    return Simulation(observations=Observations(y), states=states, inputs=inputs)
