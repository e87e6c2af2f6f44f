"""Tests for the Monte Carlo and Kronecker identity checks."""

import numpy as np
import pytest

from emfg.errors import InvalidConfig
from emfg.messages.gaussian import GaussianMoment
from emfg.messages.multipliers import MultiplierSpec
from emfg.oracle.identities import kron_bilinear_sides, kron_quadratic_sides, mc_moments


def test_kron_sides_agree(rng, random_spd) -> None:
    """Both vectorized forms equal the direct products to 1e-12."""
    for _ in range(10):
        A = rng.normal(size=(2, 3))
        W = random_spd(2)
        x = rng.normal(size=3)
        y = rng.normal(size=2)

        direct, vectorized = kron_quadratic_sides(A, W, x)
        assert abs(direct - vectorized) <= 1e-12 * max(1.0, abs(direct))

        direct, vectorized = kron_bilinear_sides(A, W, x, y)
        assert abs(direct - vectorized) <= 1e-12 * max(1.0, abs(direct))


def test_trace_identity_by_sampling(rng, random_spd) -> None:
    """E[X^T W Y] agrees with the closed form within three standard errors."""
    spec = MultiplierSpec.create("componentwise", n=2, noise=random_spd(2))
    fwd = GaussianMoment(rng.normal(size=2), random_spd(2))

    check = mc_moments(spec, rng.normal(size=2), fwd, spec.noise_cov(), n_samples=100_000, seed=3, weight=random_spd(2))

    assert check.z_score() < 3.0


def test_trace_identity_zero_means(random_spd) -> None:
    """With zero means the closed form reduces to the trace term."""
    spec = MultiplierSpec.create("scalar_times_vector", n=2, noise=0.5 * np.eye(2))
    cov = random_spd(2)

    check = mc_moments(spec, [1.5], GaussianMoment(np.zeros(2), cov), spec.noise_cov(), n_samples=20_000, seed=4)

    assert check.closed_form == pytest.approx(1.5 * np.trace(cov))


def test_mc_moments_requires_enough_samples() -> None:
    """Small sample sizes are rejected."""
    spec = MultiplierSpec.create("inner_product", n=1, noise=1.0)
    with pytest.raises(InvalidConfig):
        mc_moments(spec, [1.0], GaussianMoment([0.0], [[1.0]]), [[1.0]], n_samples=100, seed=0)
