"""
Sampling and direct-evaluation checks of the algebraic identities behind the tables.

- `mc_moments`: Monte Carlo estimate of E[X^T W Y] against tr(W V_{XY^T}^T) + m_X^T W m_Y.
- `kron_quadratic_sides`: (A x)^T W (A x) against rvect(A) (W kron x x^T) rvect(A)^T.
- `kron_bilinear_sides`: (A x)^T W y against rvect(A) (W kron I_n) cvect(x y^T).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from emfg.constants import MIN_MC_SAMPLES
from emfg.errors import DimensionMismatch, InvalidConfig
from emfg.messages.gaussian import Gaussian, as_moment
from emfg.messages.multipliers import MultiplierSpec, build_A
from emfg.messages.vectorize import cvect, kron, rvect


@dataclass(frozen=True, slots=True)
class TraceCheck:
    """Monte Carlo side (mean and standard error) and closed-form side of the trace identity."""

    sample_mean: float
    standard_error: float
    closed_form: float

    def z_score(self) -> float:
        """Difference of the two sides in standard errors."""
        if self.standard_error == 0.0:
            return 0.0 if self.sample_mean == self.closed_form else float("inf")
        return abs(self.sample_mean - self.closed_form) / self.standard_error


def mc_moments(
    spec: MultiplierSpec,
    theta: Any,
    fwd_x: Gaussian,
    v_z: np.ndarray,
    n_samples: int,
    seed: int,
    weight: np.ndarray | None = None,
) -> TraceCheck:
    """
    Both sides of E[X^T W Y] = tr(W V_{XY^T}^T) + m_X^T W m_Y for Y = A(theta) X + Z.

    X is drawn from `fwd_x` and Z from N(0, v_z); `weight` defaults to the
    identity. Deterministic given `seed`.

    Usage example
    -------------
        check = mc_moments(spec, theta, GaussianMoment(m, V), spec.noise_cov(), 100_000, seed=3)
        assert check.z_score() < 3
    """
    if n_samples < MIN_MC_SAMPLES:
        raise InvalidConfig(f"n_samples must be >= {MIN_MC_SAMPLES}, got {n_samples}")
    prior = as_moment(fwd_x)
    A = build_A(spec, theta)
    v_z = np.atleast_2d(np.asarray(v_z, dtype=float))
    weight = np.eye(spec.n, spec.m) if weight is None else np.atleast_2d(np.asarray(weight, dtype=float))
    if weight.shape != (spec.n, spec.m):
        raise DimensionMismatch(f"weight must be {spec.n}x{spec.m}, got {weight.shape}")

    rng = np.random.default_rng(seed)
    x = rng.multivariate_normal(prior.mean, prior.cov, size=n_samples)
    z = rng.multivariate_normal(np.zeros(spec.m), v_z, size=n_samples)
    y = x @ A.T + z
    samples = np.einsum("ij,jk,ik->i", x, weight, y)

    m_y = A @ prior.mean
    v_xyt = prior.cov @ A.T
    closed = float(np.trace(weight @ v_xyt.T) + prior.mean @ weight @ m_y)
    return TraceCheck(
        sample_mean=float(np.mean(samples)),
        standard_error=float(np.std(samples, ddof=1) / np.sqrt(n_samples)),
        closed_form=closed,
    )


def kron_quadratic_sides(A: np.ndarray, W: np.ndarray, x: np.ndarray) -> tuple[float, float]:
    """(A x)^T W (A x) and its rvect / Kronecker form."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    x = np.asarray(x, dtype=float).reshape(-1)
    direct = float((A @ x) @ W @ (A @ x))
    row = rvect(A)
    return direct, float(row @ kron(W, np.outer(x, x)) @ row)


def kron_bilinear_sides(A: np.ndarray, W: np.ndarray, x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """(A x)^T W y and rvect(A) (W kron I_n) cvect(x y^T)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    direct = float((A @ x) @ W @ y)
    return direct, float(rvect(A) @ kron(W, np.eye(x.size)) @ cvect(np.outer(x, y)))
