"""Tests for the sum-product sweep, simulation and exact log-likelihood."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from emfg.errors import DegenerateMessage, DimensionMismatch, InvalidConfig
from emfg.messages.gaussian import GaussianMoment, GaussianWeight
from emfg.models.config import LinearModel, ModelKind
from emfg.models.state_space import (
    Observations,
    backward_pass,
    diffuse_log_likelihood,
    innovations_log_likelihood,
    log_likelihood,
    simulate,
    sweep,
    split_prior,
    transition,
)
from emfg.oracle.joint import dense_state_space


def _model(kind: str, order: int, length: int, **kwargs) -> LinearModel:
    return LinearModel.from_mapping({"kind": kind, "order": order, "length": length, **kwargs})


# ==================================================================================================
#                                   SIMULATION
# ==================================================================================================


def test_simulate_is_deterministic_per_seed() -> None:
    """Same seed, same data; different seed, different data."""
    model = _model("ar", 2, 50)
    theta = np.array([0.5, -0.2])

    first = simulate(model, theta, seed=7)
    again = simulate(model, theta, seed=7)
    other = simulate(model, theta, seed=8)

    assert_allclose(first.observations.y, again.observations.y, rtol=0, atol=0)
    assert not np.allclose(first.observations.y, other.observations.y)
    assert first.states.shape == (51, 2)
    assert first.inputs.shape == (50,)


def test_simulate_fir_with_zero_taps_is_pure_noise() -> None:
    """FIR n=1, theta=0: y_k ~ N(0, sigma_Z^2)."""
    model = _model("fir", 1, 100_000, sigma_z2=0.3)

    y = simulate(model, np.zeros(1), seed=1).observations.y

    assert abs(np.var(y) - 0.3) < 0.05 * 0.3


def test_simulate_ar_states_follow_recursion() -> None:
    """States obey X_k = A X_{k-1} + b U_k and y_k - X_k[0] is the noise."""
    model = _model("ar", 2, 20)
    theta = np.array([0.4, 0.3])
    sim = simulate(model, theta, seed=3)
    A, b = transition(model, theta)

    for k in range(1, 21):
        assert_allclose(sim.states[k], A @ sim.states[k - 1] + b * sim.inputs[k - 1])


def test_zero_variances_are_rejected() -> None:
    """sigma_U^2 and sigma_Z^2 must be positive."""
    with pytest.raises(InvalidConfig):
        _model("fir", 1, 10, sigma_u2=0.0)
    with pytest.raises(InvalidConfig):
        _model("fir", 1, 10, sigma_z2=0.0)


def test_observations_must_be_finite() -> None:
    """NaN outputs are not observations."""
    with pytest.raises(ValueError):
        Observations([1.0, np.nan])


# ==================================================================================================
#                                   SWEEPS
# ==================================================================================================


def test_fir_order_one_prediction_is_fresh_input() -> None:
    """With A = 0 the predicted state variance is sigma_U^2 at every step."""
    model = _model("fir", 1, 6, sigma_u2=2.5)
    y = simulate(model, [0.8], seed=2).observations

    result = sweep(model, [0.8], y)

    assert len(result.fwd) == len(result.bwd) == 7
    for predicted in result.pred[1:]:
        assert isinstance(predicted, GaussianMoment)
        assert_allclose(predicted.cov, [[2.5]])


def test_ar_zero_theta_reaches_shift_register_covariance() -> None:
    """theta = 0 makes every state entry an independently observed input."""
    sigma_u2, sigma_z2 = 1.5, 0.5
    model = _model("ar", 3, 8, sigma_u2=sigma_u2, sigma_z2=sigma_z2)
    y = simulate(model, np.zeros(3), seed=4).observations

    result = sweep(model, np.zeros(3), y)

    per_input = sigma_u2 * sigma_z2 / (sigma_u2 + sigma_z2)
    for k in range(3, 9):
        assert_allclose(result.fwd[k].cov, per_input * np.eye(3), atol=1e-12)


def test_single_observation_matches_direct_conditioning() -> None:
    """N = 1: the smoothed X_1 equals the dense posterior."""
    model = _model("fir", 2, 1)
    theta = np.array([0.7, -0.4])
    y = Observations([1.3])

    dense = dense_state_space(model, theta, y)
    posterior = sweep(model, theta, y).posterior(1)

    assert_allclose(posterior.mean, dense.means[1], rtol=1e-10, atol=1e-12)
    assert_allclose(posterior.cov, dense.covs[1], rtol=1e-10, atol=1e-12)


@pytest.mark.parametrize("kind", ["fir", "ar"])
@pytest.mark.parametrize("order", [1, 2])
def test_smoothed_states_and_likelihood_match_dense_joint(kind: str, order: int) -> None:
    """Forward x backward posteriors and log p(y | theta) equal the dense joint Gaussian."""
    model = _model(kind, order, 5, sigma_u2=1.2, sigma_z2=0.3)
    theta = np.array([0.6, -0.3][:order])
    y = simulate(model, theta, seed=10 + order).observations

    result = sweep(model, theta, y)
    dense = dense_state_space(model, theta, y)

    for k in range(model.length + 1):
        posterior = result.posterior(k)
        assert_allclose(posterior.mean, dense.means[k], rtol=1e-8, atol=1e-10)
        assert_allclose(posterior.cov, dense.covs[k], rtol=1e-8, atol=1e-10)
    assert log_likelihood(model, theta, y) == pytest.approx(dense.log_likelihood, rel=1e-8)
    assert result.log_likelihood() == pytest.approx(dense.log_likelihood, rel=1e-8)


def test_backward_pass_is_independent_of_forward_pass() -> None:
    """The backward messages of a sweep equal a standalone backward pass."""
    model = _model("ar", 2, 6)
    theta = np.array([0.3, 0.2])
    y = simulate(model, theta, seed=5).observations

    standalone = backward_pass(model, theta, y)
    result = sweep(model, theta, y)

    for ours, theirs in zip(result.bwd, standalone, strict=True):
        assert_allclose(ours.weight, theirs.weight)
        assert_allclose(ours.weighted_mean, theirs.weighted_mean)
    assert not np.any(result.bwd[-1].weight)


def test_uninformative_prior_starts_in_weight_form() -> None:
    """FIR n=2 with a flat X_0 prior: the first prediction is degenerate, later ones are not."""
    model = _model("fir", 2, 6, x0_prior="uninformative")
    theta = np.array([0.5, 0.5])
    y = simulate(model, theta, seed=6).observations

    result = sweep(model, theta, y)

    assert isinstance(result.pred[1], GaussianWeight)
    assert result.innovations[0] is None
    assert all(item is not None for item in result.innovations[1:])
    assert isinstance(result.fwd[-1], GaussianMoment)
    assert np.isfinite(result.log_likelihood())
    assert result.log_likelihood() == pytest.approx(log_likelihood(model, theta, y), rel=1e-12)


def test_split_prior_separates_flat_directions() -> None:
    """Weight diag(2, 0): proper variance 1/2 on the first axis, flat basis along the second."""
    proper, basis = split_prior(GaussianWeight(np.diag([2.0, 0.0]), [1.0, 0.0]))

    assert_allclose(proper.cov, np.diag([0.5, 0.0]), atol=1e-15)
    assert_allclose(proper.mean, [0.5, 0.0], atol=1e-15)
    assert_allclose(np.abs(basis), [[0.0], [1.0]], atol=1e-15)


def test_diffuse_likelihood_without_flat_directions_is_the_innovations_one() -> None:
    """A proper X_0 prior leaves no diffuse correction."""
    model = _model("ar", 2, 40, sigma_z2=0.2)
    theta = np.array([0.5, -0.3])
    y = simulate(model, theta, seed=21).observations

    assert diffuse_log_likelihood(model, theta, y) == pytest.approx(log_likelihood(model, theta, y), rel=1e-10)


@pytest.mark.parametrize(
    ("kind", "theta_a", "theta_b"), [("fir", [0.5, 0.25], [0.4, 0.6]), ("ar", [0.5, 0.25], [0.3, -0.2])]
)
def test_flat_prior_likelihood_differences_match_a_wide_proper_prior(
    kind: str, theta_a: list[float], theta_b: list[float]
) -> None:
    """Uninformative X_0: log-likelihood differences across theta equal those under N(0, 1e6 I)."""
    y = simulate(_model(kind, 2, 200, sigma_z2=0.1), np.array(theta_a), seed=22).observations
    flat = _model(kind, 2, 200, sigma_z2=0.1, x0_prior="uninformative")
    wide = _model(kind, 2, 200, sigma_z2=0.1, x0_prior={"mean": [0.0, 0.0], "cov": [[1e6, 0.0], [0.0, 1e6]]})

    flat_diff = log_likelihood(flat, theta_a, y) - log_likelihood(flat, theta_b, y)
    wide_diff = log_likelihood(wide, theta_a, y) - log_likelihood(wide, theta_b, y)

    assert flat_diff == pytest.approx(wide_diff, abs=1e-3)


def test_innovations_likelihood_rejects_diffuse_steps() -> None:
    """A missing innovation cannot be summed."""
    with pytest.raises(DegenerateMessage):
        innovations_log_likelihood((None,), np.array([1.0]))


def test_one_step_likelihood_closed_form() -> None:
    """FIR n=1, N=1, flat prior: y_1 ~ N(0, theta^2 sigma_U^2 + sigma_Z^2)."""
    theta, sigma_u2, sigma_z2, y1 = 0.9, 1.4, 0.2, 0.75
    model = _model("fir", 1, 1, sigma_u2=sigma_u2, sigma_z2=sigma_z2, x0_prior="uninformative")

    s2 = theta**2 * sigma_u2 + sigma_z2
    expected = -0.5 * np.log(2.0 * np.pi * s2) - y1**2 / (2.0 * s2)

    assert log_likelihood(model, [theta], Observations([y1])) == pytest.approx(expected, rel=1e-12)


def test_sweep_checks_lengths_and_theta() -> None:
    """Observation count and theta size must match the model."""
    model = _model("fir", 2, 3)
    with pytest.raises(DimensionMismatch):
        sweep(model, np.zeros(2), Observations([1.0, 2.0]))
    with pytest.raises(DimensionMismatch):
        sweep(model, np.zeros(3), Observations([1.0, 2.0, 3.0]))


def test_model_kind_parse_accepts_members() -> None:
    """ModelKind.parse is idempotent on enum members."""
    assert ModelKind.parse(ModelKind.AR) is ModelKind.AR
