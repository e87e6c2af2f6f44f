"""Tests for Gaussian message representations and elementary combination rules."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from emfg.checks.tables import random_spd
from emfg.errors import DegenerateMessage, DimensionMismatch, InvalidConfig, SingularCovariance, UnidentifiableParameter
from emfg.messages.gaussian import (
    GaussianMoment,
    GaussianWeight,
    Tolerances,
    add_noise_weight,
    argmax,
    backward_through_matrix,
    check_symmetric_psd,
    combine_moment_weight,
    combine_parallel,
    log_density,
    propagate_affine,
    psd_project,
    to_moment,
    to_weight,
)

# ==================================================================================================
#                                   CONVERSIONS
# ==================================================================================================


def test_to_weight_identity_and_scalar_cases() -> None:
    """Unit covariance maps to unit weight; scalar case is a reciprocal."""
    identity = to_weight(GaussianMoment(np.zeros(2), np.eye(2)))
    assert_allclose(identity.weight, np.eye(2))
    assert_allclose(identity.weighted_mean, np.zeros(2))

    scalar = to_weight(GaussianMoment([2.0], [[4.0]]))
    assert_allclose(scalar.weight, [[0.25]])
    assert_allclose(scalar.weighted_mean, [0.5])


def test_to_weight_inverts_random_covariance(random_spd) -> None:
    """W V = I for a random positive definite covariance."""
    cov = random_spd(3)
    weight = to_weight(GaussianMoment(np.ones(3), cov)).weight

    assert np.max(np.abs(weight @ cov - np.eye(3))) < 1e-10


def test_to_weight_rejects_singular_covariance() -> None:
    """A rank-deficient covariance has no weight form."""
    with pytest.raises(SingularCovariance):
        to_weight(GaussianMoment([0.0, 0.0], [[1.0, 1.0], [1.0, 1.0]]))


def test_to_moment_examples() -> None:
    """Identity and scalar conversions back to moment form."""
    identity = to_moment(GaussianWeight(np.eye(2), np.zeros(2)))
    assert_allclose(identity.cov, np.eye(2))

    scalar = to_moment(GaussianWeight([[2.0]], [4.0]))
    assert_allclose(scalar.mean, [2.0])
    assert_allclose(scalar.cov, [[0.5]])


def test_to_moment_rejects_degenerate_weight() -> None:
    """Singular weight messages must stay in weight form."""
    with pytest.raises(DegenerateMessage):
        to_moment(GaussianWeight([[1.0, 0.0], [0.0, 0.0]], [1.0, 0.0]))


@settings(max_examples=40, deadline=None)
@given(dim=st.integers(min_value=1, max_value=5), seed=st.integers(min_value=0, max_value=2**31 - 1))
def test_weight_moment_round_trip(dim: int, seed: int) -> None:
    """to_moment(to_weight(g)) reproduces g for random positive definite covariances."""
    rng = np.random.default_rng(seed)
    g = GaussianMoment(rng.normal(size=dim), random_spd(rng, dim))

    back = to_moment(to_weight(g))

    assert_allclose(back.mean, g.mean, rtol=1e-9, atol=1e-9)
    assert_allclose(back.cov, g.cov, rtol=1e-9, atol=1e-9)


def test_messages_are_read_only_and_shape_checked() -> None:
    """Arrays are frozen after construction and mismatched shapes are rejected."""
    g = GaussianMoment([1.0, 2.0], np.eye(2))
    with pytest.raises(ValueError):
        g.mean[0] = 5.0

    with pytest.raises(DimensionMismatch):
        GaussianMoment([1.0, 2.0], np.eye(3))
    with pytest.raises(DimensionMismatch):
        GaussianWeight(np.eye(2), [1.0])


def test_validate_flags_asymmetric_and_indefinite_matrices() -> None:
    """validate() enforces symmetry within tau_sym and PSD."""
    with pytest.raises(ValueError, match="not symmetric"):
        GaussianMoment([0.0, 0.0], [[1.0, 0.5], [0.0, 1.0]]).validate()
    with pytest.raises(ValueError, match="positive semi-definite"):
        GaussianWeight([[1.0, 0.0], [0.0, -1.0]], [0.0, 0.0]).validate()

    # A singular weight is a valid degenerate message.
    GaussianWeight([[1.0, 0.0], [0.0, 0.0]], [0.0, 0.0]).validate()


def test_tolerances_from_mapping_validates_fields() -> None:
    """Negative tolerances are configuration errors naming the field."""
    assert Tolerances.from_mapping({"tau_solve": 1e-9}).tau_solve == 1e-9
    with pytest.raises(InvalidConfig, match="tolerances.tau_sym"):
        Tolerances.from_mapping({"tau_sym": -1.0})


# ==================================================================================================
#                                   COMBINATION RULES
# ==================================================================================================


def test_combine_parallel_equal_weight_average() -> None:
    """Two unit-weight messages at 0 and 2 combine to mean 1."""
    out = combine_parallel(GaussianWeight([[1.0]], [0.0]), GaussianWeight([[1.0]], [2.0]))

    assert_allclose(out.weight, [[2.0]])
    assert_allclose(out.weighted_mean, [2.0])
    assert_allclose(to_moment(out).mean, [1.0])


def test_combine_parallel_identity_and_associativity(rng, random_spd) -> None:
    """The zero-weight message is neutral; grouping order does not matter."""
    messages = [GaussianWeight(random_spd(2), rng.normal(size=2)) for _ in range(3)]
    a, b, c = messages

    neutral = combine_parallel(GaussianWeight.uninformative(2), a)
    assert_allclose(neutral.weight, a.weight)
    assert_allclose(neutral.weighted_mean, a.weighted_mean)

    left = combine_parallel(combine_parallel(a, b), c)
    right = combine_parallel(a, combine_parallel(c, b))
    assert_allclose(left.weight, right.weight, atol=1e-12)
    assert_allclose(left.weighted_mean, right.weighted_mean, atol=1e-12)
    assert np.linalg.eigvalsh(left.weight - a.weight).min() >= -1e-12


def test_combine_parallel_rejects_dimension_mismatch() -> None:
    """Messages over different variables cannot be combined."""
    with pytest.raises(DimensionMismatch):
        combine_parallel(GaussianWeight.uninformative(1), GaussianWeight.uninformative(2))


def test_propagate_affine_examples() -> None:
    """Identity, zero-matrix and scalar cases."""
    g = GaussianMoment([1.0, -1.0], [[2.0, 0.5], [0.5, 1.0]])
    same = propagate_affine(g, np.eye(2), np.zeros((2, 2)))
    assert_allclose(same.mean, g.mean)
    assert_allclose(same.cov, g.cov)

    v_z = np.array([[3.0, 1.0], [1.0, 2.0]])
    noise_only = propagate_affine(g, np.zeros((2, 2)), v_z)
    assert_allclose(noise_only.mean, [0.0, 0.0])
    assert_allclose(noise_only.cov, v_z)

    scalar = propagate_affine(GaussianMoment([1.0], [[1.0]]), [[2.0]], [[3.0]])
    assert_allclose(scalar.mean, [2.0])
    assert_allclose(scalar.cov, [[7.0]])


def test_propagate_affine_keeps_covariance_psd(rng, random_spd) -> None:
    """A V A^T + V_add stays PSD for an arbitrary rectangular A."""
    g = GaussianMoment(rng.normal(size=3), random_spd(3))
    out = propagate_affine(g, rng.normal(size=(2, 3)), np.zeros((2, 2)))

    out.validate()


def test_argmax_examples_and_scale_invariance() -> None:
    """argmax solves W theta = Wm and ignores positive rescaling."""
    assert_allclose(argmax(GaussianWeight(np.eye(2), [1.0, 2.0])), [1.0, 2.0])
    assert_allclose(argmax(GaussianWeight(2.0 * np.eye(2), [2.0, 4.0])), [1.0, 2.0])

    with pytest.raises(UnidentifiableParameter):
        argmax(GaussianWeight([[1.0, 1.0], [1.0, 1.0]], [1.0, 1.0]))


def test_psd_project_floors_and_symmetrizes() -> None:
    """Negative round-off eigenvalues are clamped; PSD input passes through."""
    psd = np.array([[2.0, 1.0], [1.0, 2.0]])
    assert_allclose(psd_project(psd), psd)

    assert_allclose(psd_project(np.diag([1.0, -1e-14])), np.diag([1.0, 0.0]), atol=1e-15)

    skewed = np.array([[1.0, 0.2], [0.0, 1.0]])
    assert_allclose(psd_project(skewed), [[1.0, 0.1], [0.1, 1.0]])


def test_check_symmetric_psd_tolerates_round_off() -> None:
    """Eigenvalues a hair below zero are accepted at tau_psd = 0."""
    check_symmetric_psd(np.diag([1.0, -1e-13]))
    with pytest.raises(ValueError):
        check_symmetric_psd(np.diag([1.0, -1e-3]))


# ==================================================================================================
#                                   SUPPLEMENTARY RULES
# ==================================================================================================


def test_backward_through_matrix_matches_definition(rng, random_spd) -> None:
    """(A^T W A, A^T Wm) for a rectangular A."""
    A = rng.normal(size=(2, 3))
    g = GaussianWeight(random_spd(2), rng.normal(size=2))

    out = backward_through_matrix(g, A)

    assert_allclose(out.weight, A.T @ g.weight @ A)
    assert_allclose(out.weighted_mean, A.T @ g.weighted_mean)


def test_add_noise_weight_matches_moment_form(rng, random_spd) -> None:
    """For PD messages, adding noise in weight form equals V + V_add in moment form."""
    g = GaussianMoment(rng.normal(size=2), random_spd(2))
    v_add = random_spd(2)

    via_weight = to_moment(add_noise_weight(to_weight(g), v_add))

    assert_allclose(via_weight.mean, g.mean, atol=1e-12)
    assert_allclose(via_weight.cov, g.cov + v_add, atol=1e-12)


def test_add_noise_weight_handles_singular_weight() -> None:
    """A degenerate message stays degenerate and finite."""
    g = GaussianWeight([[1.0, 0.0], [0.0, 0.0]], [2.0, 0.0])

    out = add_noise_weight(g, np.eye(2))

    assert_allclose(out.weight, [[0.5, 0.0], [0.0, 0.0]])
    assert_allclose(out.weighted_mean, [1.0, 0.0])


def test_combine_moment_weight_matches_parallel_combination(rng, random_spd) -> None:
    """Moment-form forward times weight-form backward equals the product in weight form."""
    fwd = GaussianMoment(rng.normal(size=2), random_spd(2))
    bwd = GaussianWeight(random_spd(2), rng.normal(size=2))

    posterior = combine_moment_weight(fwd, bwd)
    expected = to_moment(combine_parallel(to_weight(fwd), bwd))

    assert_allclose(posterior.mean, expected.mean, atol=1e-12)
    assert_allclose(posterior.cov, expected.cov, atol=1e-12)

    # The zero backward message leaves the forward message unchanged.
    untouched = combine_moment_weight(fwd, GaussianWeight.uninformative(2))
    assert_allclose(untouched.cov, fwd.cov, atol=1e-14)


def test_log_density_standard_normal() -> None:
    """log N(0; 0, 1) = -log(2 pi) / 2."""
    value = log_density(GaussianMoment([0.0], [[1.0]]), [0.0])

    assert value == pytest.approx(-0.5 * np.log(2.0 * np.pi))
