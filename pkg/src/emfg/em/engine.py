# ==================================================================================================
#                               EM loop
# ==================================================================================================
#
# One EM iteration on the state-space models:
#
# 1) sum-product sweep with the current estimate plugged into every section
# 2) one backward EM message per section, out of the multiplier node that
#    carries theta (FIR output node or AR transition node)
# 3) combination of all section messages along the equality chain
#    theta_1 = ... = theta_N, plus an optional Gaussian prior
# 4) the new estimate is the argmax of the combined Gaussian
#
# The batch schedule repeats 1-4. The serial schedule keeps a running estimate
# that is refreshed after every section of a left-to-right pass.
#
# Log-likelihoods are reported for every iterate. With the batch schedule they
# must be nondecreasing; violations beyond a small slack are logged and kept in
# the report, never raised.

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from functools import reduce
from typing import Any

import numpy as np

from emfg.constants import MONOTONICITY_SLACK
from emfg.em.config import EmConfig, FirRule, Schedule
from emfg.errors import InvalidConfig, UnidentifiableParameter
from emfg.messages.gaussian import (
    Gaussian,
    GaussianMoment,
    GaussianWeight,
    argmax,
    as_weight,
    combine_moment_weight,
    combine_parallel,
)
from emfg.messages.multipliers import (
    EmGaussian,
    MultiplierKind,
    MultiplierSpec,
    em_message,
    em_message_fixed_y,
    marginals,
)
from emfg.models.config import LinearModel, ModelKind
from emfg.models.state_space import (
    Observations,
    SweepResult,
    backward_pass,
    forward_step,
    log_likelihood,
    observation_weight,
    settle,
    sweep,
)

LOGGER = logging.getLogger(__name__)


# ==================================================================================================
#                                   TYPES
# ==================================================================================================


@dataclass(slots=True)
class EmReport:
    """
    Trace of one EM run.

    Attributes
    ----------
    iterates
        theta^(0), theta^(1), ...; the first entry is the initial estimate.
    log_liks
        log p(y | theta^(k)) for every iterate.
    converged
        Whether the relative-change criterion was met before max_iter.
    iterations_used
        Number of updates performed (len(iterates) - 1).
    warnings
        Human-readable monotonicity violations (batch schedule only).
    schedule
        Schedule that produced the trace.
    """

    iterates: list[np.ndarray]
    log_liks: list[float]
    converged: bool
    iterations_used: int
    warnings: list[str] = field(default_factory=list)
    schedule: Schedule = Schedule.BATCH

    @property
    def theta(self) -> np.ndarray:
        """Final estimate."""
        return self.iterates[-1]

    def to_dict(self) -> dict[str, Any]:
        """JSON-ready view of the trace."""
        return {
            "schedule": self.schedule.value,
            "converged": self.converged,
            "iterations_used": self.iterations_used,
            "iterates": [np.asarray(theta, dtype=float).tolist() for theta in self.iterates],
            "log_liks": [float(value) for value in self.log_liks],
            "warnings": list(self.warnings),
        }


# ==================================================================================================
#                                   SECTION MESSAGES
# ==================================================================================================


def _fir_section_message(
    model: LinearModel,
    theta: np.ndarray,
    predicted: Gaussian,
    bwd_k: GaussianWeight,
    y_k: float,
    config: EmConfig,
) -> EmGaussian:
    tol = config.tolerances
    if config.fir_rule is FirRule.FIXED_Y:
        local = combine_parallel(as_weight(predicted, tol), bwd_k)
        return em_message_fixed_y(local, y_k, model.sigma_z2, theta, tol)
    spec = MultiplierSpec.create(MultiplierKind.INNER_PRODUCT, n=model.order, noise=model.sigma_z2)
    state_without_y = combine_moment_weight(predicted, bwd_k, tol)
    exact_output = GaussianMoment([y_k], [[0.0]])
    return em_message(spec, marginals(spec, theta, state_without_y, exact_output, tol), tol)


def _ar_section_message(
    model: LinearModel,
    theta: np.ndarray,
    filtered_prev: Gaussian,
    bwd_k: GaussianWeight,
    y_k: float,
    config: EmConfig,
) -> EmGaussian:
    tol = config.tolerances
    spec = MultiplierSpec.create(MultiplierKind.AUTOREGRESSION, n=model.order, noise=model.sigma_u2)
    bwd_y = combine_parallel(bwd_k, observation_weight(model, theta, y_k))
    return em_message(spec, marginals(spec, theta, filtered_prev, bwd_y, tol), tol)


def section_message(
    model: LinearModel,
    theta: np.ndarray,
    *,
    filtered_prev: Gaussian,
    predicted: Gaussian,
    bwd_k: GaussianWeight,
    y_k: float,
    config: EmConfig,
) -> EmGaussian:
    """
    EM message of section k out of the node carrying theta.

    FIR sections use the output node Y_k = theta^T X_k + Z_k with the state
    message pred[k] x bwd[k]; AR sections use the transition node
    X_k = companion(theta) X_{k-1} + b U_k with fwd[k-1] and bwd[k] x (observation y_k).
    """
    if model.kind is ModelKind.FIR:
        return _fir_section_message(model, theta, predicted, bwd_k, y_k, config)
    return _ar_section_message(model, theta, filtered_prev, bwd_k, y_k, config)


def section_messages(
    model: LinearModel,
    theta: np.ndarray,
    y: Observations,
    *,
    config: EmConfig | None = None,
    result: SweepResult | None = None,
) -> list[EmGaussian]:
    """
    All N section messages at the estimate theta.

    Usage example
    -------------
        messages = section_messages(model, theta, observations)
        theta_new = argmax(combine_messages(messages, None, model.order))
    """
    config = config or EmConfig()
    theta = _checked_theta(model, theta)
    result = result or sweep(model, theta, y, config.tolerances)
    return [
        section_message(
            model,
            theta,
            filtered_prev=result.fwd[k - 1],
            predicted=result.pred[k],
            bwd_k=result.bwd[k],
            y_k=float(y.y[k - 1]),
            config=config,
        )
        for k in range(1, model.length + 1)
    ]


def combine_messages(
    messages: Sequence[GaussianWeight],
    theta_prior: GaussianWeight | None,
    order: int,
) -> GaussianWeight:
    """Equality-chain combination of section messages and the optional prior."""
    start = theta_prior if theta_prior is not None else GaussianWeight.uninformative(order)
    return reduce(combine_parallel, messages, start)


def _checked_theta(model: LinearModel, theta: np.ndarray) -> np.ndarray:
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if theta.shape != (model.order,):
        raise InvalidConfig(f"theta must have {model.order} entries, got shape {theta.shape}")
    if not np.all(np.isfinite(theta)):
        raise InvalidConfig("theta must be finite")
    return theta


# ==================================================================================================
#                                   UPDATES
# ==================================================================================================


def _batch_update(
    model: LinearModel, theta: np.ndarray, y: Observations, config: EmConfig
) -> tuple[np.ndarray, float]:
    """One batch update; also returns log p(y | theta) from the same forward pass."""
    result = sweep(model, theta, y, config.tolerances)
    messages = section_messages(model, theta, y, config=config, result=result)
    combined = combine_messages(messages, config.theta_prior, model.order)
    return argmax(combined, config.tolerances), result.log_likelihood()


def em_update(
    model: LinearModel,
    theta: np.ndarray,
    y: Observations,
    config: EmConfig | None = None,
) -> np.ndarray:
    """
    One EM update theta -> theta_new with the batch schedule.

    Raises
    ------
    UnidentifiableParameter
        If the combined message weight is singular.
    """
    config = config or EmConfig()
    new_theta, _ = _batch_update(model, _checked_theta(model, theta), y, config)
    return new_theta


def _serial_update(
    model: LinearModel,
    theta: np.ndarray,
    y: Observations,
    config: EmConfig,
    previous: list[EmGaussian] | None,
) -> tuple[np.ndarray, list[EmGaussian]]:
    """One left-to-right pass; returns the new estimate and the fresh section messages."""
    tol = config.tolerances
    bwd = backward_pass(model, theta, y)
    head = config.theta_prior if config.theta_prior is not None else GaussianWeight.uninformative(model.order)

    # tail[j]: previous-iteration messages of the sections after section j + 1.
    tail: list[GaussianWeight] | None = None
    if previous is not None:
        tail = [GaussianWeight.uninformative(model.order)]
        for message in reversed(previous[1:]):
            tail.append(combine_parallel(message, tail[-1]))
        tail.reverse()

    running = theta.copy()
    filtered: Gaussian = settle(model.prior, tol)
    messages: list[EmGaussian] = []
    for j, y_k in enumerate(y.y):
        predicted, next_filtered, _ = forward_step(model, running, filtered, float(y_k), tol)
        message = section_message(
            model,
            running,
            filtered_prev=filtered,
            predicted=predicted,
            bwd_k=bwd[j + 1],
            y_k=float(y_k),
            config=config,
        )
        messages.append(message)
        head = combine_parallel(head, message)
        total = head if tail is None else combine_parallel(head, tail[j])
        try:
            running = argmax(total, tol)
        except UnidentifiableParameter:
            LOGGER.debug("Serial pass | section %d | running estimate kept (combined weight singular)", j + 1)
        filtered = next_filtered

    return argmax(head, tol), messages


# ==================================================================================================
#                                   DRIVERS
# ==================================================================================================


def fir_moment_estimate(model: LinearModel, y: Observations) -> np.ndarray:
    """
    Starting estimate for FIR runs from the sample autocovariances of y.

    With r_j the lag-j autocovariance, theta_1 = sqrt((r_0 - sigma_Z^2) / sigma_U^2)
    and theta_{j+1} = r_j / (sigma_U^2 theta_1), i.e. the moments of an impulse
    response dominated by its first tap. theta_1 is positive, which fixes the
    sign that the FIR likelihood cannot see. r_0 - sigma_Z^2 is floored at a
    tenth of r_0 so a noise-level guess never yields zero.

    Usage example
    -------------
        theta0 = fir_moment_estimate(model, observations)
    """
    if model.kind is not ModelKind.FIR:
        raise InvalidConfig(f"moment start is defined for FIR models, got {model.kind.value}")
    values = y.y
    N = values.size
    lags = np.array([values[j:] @ values[: N - j] / N if j < N else 0.0 for j in range(model.order)])
    signal = max(lags[0] - model.sigma_z2, 0.1 * lags[0], np.finfo(float).tiny)
    theta = np.empty(model.order)
    theta[0] = np.sqrt(signal / model.sigma_u2)
    theta[1:] = lags[1:] / (model.sigma_u2 * theta[0])
    return theta


def initial_estimate(model: LinearModel, y: Observations, config: EmConfig) -> np.ndarray:
    """theta^(0): the configured vector, else the FIR moment start or zeros for AR."""
    if config.theta_init is None and model.kind is ModelKind.FIR:
        return fir_moment_estimate(model, y)
    return config.initial_theta(model.order)


def _relative_change(new: np.ndarray, old: np.ndarray) -> float:
    return float(np.linalg.norm(new - old) / max(1.0, float(np.linalg.norm(old))))


def monotonicity_warnings(log_liks: Sequence[float], slack: float = MONOTONICITY_SLACK) -> list[str]:
    """One message per consecutive pair with log_liks[k+1] < log_liks[k] - slack."""
    out = []
    for k in range(len(log_liks) - 1):
        drop = log_liks[k] - log_liks[k + 1]
        if drop > slack:
            out.append(f"log-likelihood decreased by {drop:.3e} from iterate {k} to {k + 1}")
    return out


def _iterate(
    model: LinearModel,
    y: Observations,
    config: EmConfig,
    update: Callable[[np.ndarray], tuple[np.ndarray, float]],
    schedule: Schedule,
) -> EmReport:
    theta = _checked_theta(model, initial_estimate(model, y, config))
    iterates = [theta]
    log_liks: list[float] = []
    warnings: list[str] = []
    converged = False

    for iteration in range(1, config.max_iter + 1):
        new_theta, current_loglik = update(theta)
        log_liks.append(current_loglik)
        iterates.append(new_theta)
        change = _relative_change(new_theta, theta)
        LOGGER.debug(
            "iteration %d | theta=%s | loglik=%.12g | change=%.3e",
            iteration,
            np.array2string(new_theta, precision=6),
            current_loglik,
            change,
        )
        theta = new_theta
        if iteration == 1 and change == 0.0:
            # theta^(0) is a fixed point of the update (e.g. FIR started at 0), not a converged run.
            message = "initial estimate is a fixed point of the EM update; choose another theta_init"
            LOGGER.warning(message)
            warnings.append(message)
            break
        if change < config.tol:
            converged = True
            break

    log_liks.append(log_likelihood(model, theta, y, config.tolerances))

    if schedule is Schedule.BATCH:
        for message in monotonicity_warnings(log_liks):
            LOGGER.warning("Monotonicity violated | %s", message)
            warnings.append(message)

    LOGGER.info(
        "EM finished | schedule=%s | iterations=%d | converged=%s | loglik=%.12g",
        schedule.value,
        len(iterates) - 1,
        converged,
        log_liks[-1],
    )
    return EmReport(
        iterates=iterates,
        log_liks=log_liks,
        converged=converged,
        iterations_used=len(iterates) - 1,
        warnings=warnings,
        schedule=schedule,
    )


def run_em(model: LinearModel, y: Observations, config: EmConfig | None = None) -> EmReport:
    """
    EM with the batch schedule until the relative change drops below tol.

    Usage example
    -------------
        report = run_em(model, observations, EmConfig(max_iter=50, tol=1e-8))
        report.theta, report.log_liks[-1]
    """
    config = config or EmConfig()

    def update(theta: np.ndarray) -> tuple[np.ndarray, float]:
        return _batch_update(model, theta, y, config)

    return _iterate(model, y, config, update, Schedule.BATCH)


def run_em_serial(model: LinearModel, y: Observations, config: EmConfig | None = None) -> EmReport:
    """
    EM with the serial schedule: the estimate is refreshed after every section.

    Sections not yet visited in the current pass contribute their messages from
    the previous pass. Monotonicity is not checked for this schedule.
    """
    config = config or EmConfig()
    previous: list[EmGaussian] | None = None

    def update(theta: np.ndarray) -> tuple[np.ndarray, float]:
        nonlocal previous
        current_loglik = log_likelihood(model, theta, y, config.tolerances)
        new_theta, previous = _serial_update(model, theta, y, config, previous)
        return new_theta, current_loglik

    return _iterate(model, y, config, update, Schedule.SERIAL)


def identify(model: LinearModel, y: Observations, config: EmConfig | None = None) -> EmReport:
    """Run EM with the schedule named in the config."""
    config = config or EmConfig()
    if config.schedule is Schedule.SERIAL:
        return run_em_serial(model, y, config)
    return run_em(model, y, config)
