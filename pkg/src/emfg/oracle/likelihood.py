"""Log-likelihood evaluation over parameter grids, and central-difference gradients."""

from __future__ import annotations

import logging
from collections.abc import Sequence

import numpy as np
from tqdm.auto import tqdm

from emfg.errors import InvalidConfig
from emfg.messages.gaussian import DEFAULT_TOLERANCES, Tolerances
from emfg.models.config import LinearModel
from emfg.models.state_space import Observations, log_likelihood

LOGGER = logging.getLogger(__name__)


def likelihood_grid(
    model: LinearModel,
    y: Observations,
    theta_grid: Sequence[np.ndarray],
    *,
    progress: bool = False,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> np.ndarray:
    """
    log p(y | theta) at every grid point, in grid order.

    Usage example
    -------------
        values = likelihood_grid(model, observations, [np.array([0.5]), np.array([0.6])])
    """
    if len(theta_grid) == 0:
        raise InvalidConfig("theta grid must contain at least one point")
    values = np.empty(len(theta_grid))
    for index, theta in enumerate(tqdm(theta_grid, desc="loglik grid", disable=not progress, leave=False)):
        values[index] = log_likelihood(model, np.asarray(theta, dtype=float), y, tol)
    LOGGER.debug("Evaluated log-likelihood on %d grid points", len(theta_grid))
    return values


def numeric_gradient(
    model: LinearModel,
    y: Observations,
    theta: np.ndarray,
    h: float = 1e-4,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> np.ndarray:
    """Central-difference gradient of log p(y | theta) with step h."""
    theta = np.asarray(theta, dtype=float).reshape(-1)
    steps = np.eye(theta.size) * h
    points = [theta + step for step in steps] + [theta - step for step in steps]
    values = likelihood_grid(model, y, points, tol=tol)
    return (values[: theta.size] - values[theta.size :]) / (2.0 * h)


def parse_axis(text: str) -> np.ndarray:
    """
    Parse one `start:stop:num` axis into evenly spaced points.

    Usage example
    -------------
        parse_axis("-1:1:5")  # array([-1., -0.5, 0., 0.5, 1.])
    """
    parts = text.split(":")
    if len(parts) != 3:
        raise InvalidConfig(f"grid axis must look like start:stop:num, got {text!r}")
    try:
        start, stop, num = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise InvalidConfig(f"grid axis {text!r} is not start:stop:num") from exc
    if num < 1:
        raise InvalidConfig(f"grid axis {text!r} needs num >= 1")
    return np.linspace(start, stop, num)


def regular_grid(axes: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Cartesian product of per-coordinate axes, first coordinate varying slowest."""
    mesh = np.meshgrid(*axes, indexing="ij")
    stacked = np.stack([axis.ravel() for axis in mesh], axis=1)
    return [row for row in stacked]
