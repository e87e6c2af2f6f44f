"""
Dense joint-Gaussian references for the node marginals and the full state-space model.

Nothing here uses the message-passing formulas: every result comes from
building the joint covariance of all variables explicitly and conditioning it
with one linear solve.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy import linalg, stats

from emfg.errors import SingularSystem
from emfg.messages.gaussian import Gaussian, GaussianMoment, GaussianWeight, as_moment, symmetrize
from emfg.messages.multipliers import MultiplierMarginals, MultiplierSpec, build_A
from emfg.models.config import LinearModel
from emfg.models.state_space import Observations, output_vector, transition


def _solve_pos(matrix: np.ndarray, rhs: np.ndarray, what: str) -> np.ndarray:
    try:
        return linalg.solve(symmetrize(matrix), rhs, assume_a="pos")
    except (linalg.LinAlgError, ValueError) as exc:
        raise SingularSystem(f"{what} is singular: {exc}") from exc


def _condition(
    mean: np.ndarray,
    cov: np.ndarray,
    observed: slice,
    likelihood: Gaussian,
) -> tuple[np.ndarray, np.ndarray]:
    """Condition N(mean, cov) on a Gaussian likelihood over the `observed` block."""
    cross = cov[:, observed]
    block = cov[observed, observed]
    if isinstance(likelihood, GaussianMoment):
        innovation_cov = block + likelihood.cov
        gain = _solve_pos(innovation_cov, cross.T, "innovation covariance").T
        post_mean = mean + gain @ (likelihood.mean - mean[observed])
        post_cov = cov - gain @ cross.T
        return post_mean, symmetrize(post_cov)

    assert isinstance(likelihood, GaussianWeight)
    size = block.shape[0]
    try:
        solved = linalg.solve(
            np.eye(size) + likelihood.weight @ block,
            np.column_stack([likelihood.weight, likelihood.weighted_mean - likelihood.weight @ mean[observed]]),
        )
    except (linalg.LinAlgError, ValueError) as exc:
        raise SingularSystem(f"I + W cov is singular: {exc}") from exc
    post_mean = mean + cross @ solved[:, -1]
    post_cov = cov - cross @ solved[:, :-1] @ cross.T
    return post_mean, symmetrize(post_cov)


def condition_joint(
    spec: MultiplierSpec,
    theta: Any,
    fwd_x: Gaussian,
    bwd_y: Gaussian,
) -> MultiplierMarginals:
    """
    Node marginals by conditioning the joint of (X, Y = A(theta) X + Z).

    The joint is formed from fwd_x and V_Z, then bwd_y is multiplied in as a
    likelihood on Y. `bwd_y` may be in moment form or (possibly degenerate)
    weight form.

    Usage example
    -------------
        spec = MultiplierSpec.create("inner_product", n=1, noise=1.0)
        condition_joint(spec, [1.0], GaussianMoment([0.0], [[1.0]]), GaussianMoment([2.0], [[1.0]]))
        # m_x = 2/3, m_y = 4/3, v_x = 2/3, v_xyt = 1/3
    """
    A = build_A(spec, theta)
    prior = as_moment(fwd_x)
    n = spec.n
    mean = np.concatenate([prior.mean, A @ prior.mean])
    cov = np.block(
        [
            [prior.cov, prior.cov @ A.T],
            [A @ prior.cov, A @ prior.cov @ A.T + spec.noise_cov()],
        ]
    )
    post_mean, post_cov = _condition(mean, cov, slice(n, n + spec.m), bwd_y)
    return MultiplierMarginals(
        m_x=post_mean[:n],
        m_y=post_mean[n:],
        v_x=post_cov[:n, :n],
        v_xyt=post_cov[:n, n:],
    )


# ==================================================================================================
#                                   DENSE STATE SPACE
# ==================================================================================================


@dataclass(frozen=True, slots=True, eq=False)
class DenseStateSpace:
    """Posterior state moments and log-likelihood from the dense joint Gaussian."""

    means: np.ndarray
    covs: np.ndarray
    log_likelihood: float


def dense_state_space(model: LinearModel, theta: np.ndarray, y: Observations) -> DenseStateSpace:
    """
    Exact smoothing and log p(y | theta) by stacking the whole model.

    The latent vector is (X_0, U_1..U_N, Z_1..Z_N); every state and output is
    a linear map of it. Requires a proper X_0 prior and is meant for small N.
    """
    theta = np.asarray(theta, dtype=float)
    prior = as_moment(model.prior)
    n, N = model.order, model.length
    A, b = transition(model, theta)
    c = output_vector(model, theta)

    dim = n + 2 * N
    latent_mean = np.concatenate([prior.mean, np.zeros(2 * N)])
    latent_cov = linalg.block_diag(prior.cov, model.sigma_u2 * np.eye(N), model.sigma_z2 * np.eye(N))

    state_maps = np.zeros((N + 1, n, dim))
    state_maps[0, :, :n] = np.eye(n)
    output_map = np.zeros((N, dim))
    for k in range(1, N + 1):
        state_maps[k] = A @ state_maps[k - 1]
        state_maps[k, :, n + k - 1] += b
        output_map[k - 1] = c @ state_maps[k]
        output_map[k - 1, n + N + k - 1] += 1.0

    stacked = state_maps.reshape((N + 1) * n, dim)
    full_map = np.vstack([stacked, output_map])
    mean = full_map @ latent_mean
    cov = symmetrize(full_map @ latent_cov @ full_map.T)

    outputs = slice((N + 1) * n, (N + 1) * n + N)
    loglik = float(stats.multivariate_normal.logpdf(y.y, mean=mean[outputs], cov=cov[outputs, outputs]))
    exact = GaussianMoment(y.y, np.zeros((N, N)))
    post_mean, post_cov = _condition(mean, cov, outputs, exact)

    means = post_mean[: (N + 1) * n].reshape(N + 1, n)
    covs = np.stack([post_cov[k * n : (k + 1) * n, k * n : (k + 1) * n] for k in range(N + 1)])
    return DenseStateSpace(means=means, covs=covs, log_likelihood=loglik)
