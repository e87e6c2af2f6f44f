"""
End-to-end runs behind the CLI subcommands.

Each function takes a fully resolved `RunConfig` (or suite config), does the
work through the library, and writes its artifacts. Argument parsing and
config precedence live in `emfg.cli.options`.
"""

from __future__ import annotations

import logging
import os
import time
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from emfg.config import ProjectConfig
from emfg.constants import SEED_ENV_VAR
from emfg.em.config import EmConfig
from emfg.em.engine import EmReport, identify
from emfg.errors import InvalidConfig
from emfg.io.datasets import (
    Sidecar,
    read_dataset,
    read_sidecar,
    write_dataset,
    write_json,
    write_likelihood_grid,
    write_sidecar,
)
from emfg.models.config import LinearModel
from emfg.models.state_space import simulate
from emfg.oracle.likelihood import likelihood_grid, parse_axis, regular_grid

LOGGER = logging.getLogger(__name__)

DEFAULT_SEED: int = 0
# theta_k = 0.5^k: a decaying FIR response and, since sum_k 0.5^k < 1, a stable AR model.
DEFAULT_THETA_DECAY: float = 0.5


# ==================================================================================================
#                                   RUN CONFIG
# ==================================================================================================


@dataclass(frozen=True, slots=True, eq=False)
class RunConfig:
    """
    Everything one CLI run needs, after flags, environment and config are merged.

    Attributes
    ----------
    model
        Model of the run. For identify and loglik-grid the length is replaced
        by the dataset length.
    em
        EM settings (identify only).
    seed
        Simulation seed; identify only records it in the report.
    out_path
        Output file.
    in_path
        Dataset to read (identify, loglik-grid).
    theta_true
        Coefficients to simulate from (simulate only).
    """

    model: LinearModel
    out_path: Path
    em: EmConfig = field(default_factory=EmConfig)
    seed: int = DEFAULT_SEED
    in_path: Path | None = None
    theta_true: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        """Check paths and the theta_true length."""
        if not str(self.out_path).strip():
            raise InvalidConfig("run.out must be a non-empty path")
        if self.in_path is not None and not str(self.in_path).strip():
            raise InvalidConfig("run.in must be a non-empty path")
        if self.theta_true is not None and len(self.theta_true) != self.model.order:
            raise InvalidConfig(
                f"run.theta has {len(self.theta_true)} entries, model.order is {self.model.order}"
            )


def resolve_seed(flag: int | None, cfg: ProjectConfig, *, section: str | None = None) -> int:
    """
    Seed precedence: flag, then the EMFG_SEED environment variable, then
    `<section>.seed`, then the top-level `seed:` of the config, then 0.
    """
    if flag is not None:
        return int(flag)
    env_value = os.environ.get(SEED_ENV_VAR)
    if env_value is not None and env_value.strip():
        try:
            return int(env_value)
        except ValueError as exc:
            raise InvalidConfig(f"{SEED_ENV_VAR} must be an integer, got {env_value!r}") from exc
    raw = cfg.raw.get("seed", DEFAULT_SEED)
    if section is not None and "seed" in cfg.section(section):
        raw = cfg.section(section)["seed"]
    if isinstance(raw, bool) or not isinstance(raw, int):
        raise InvalidConfig(f"{section + '.' if section else ''}seed must be an integer, got {raw!r}")
    return raw


def parse_theta(text: str | float | Sequence[float] | None) -> tuple[float, ...] | None:
    """Comma-separated (or already split) coefficients; None passes through."""
    if text is None:
        return None
    if isinstance(text, str):
        parts: list[Any] = text.split(",")
    elif isinstance(text, (int, float)):
        parts = [text]
    else:
        parts = list(text)
    try:
        values = tuple(float(part) for part in parts if str(part).strip())
    except ValueError as exc:
        raise InvalidConfig(f"theta must be a comma-separated list of numbers, got {text!r}") from exc
    if not values or not all(np.isfinite(values)):
        raise InvalidConfig(f"theta must contain finite numbers, got {text!r}")
    return values


def default_theta_true(order: int) -> tuple[float, ...]:
    """theta_k = 0.5^k for k = 1..order."""
    return tuple(DEFAULT_THETA_DECAY ** (k + 1) for k in range(order))


def _require_input(run: RunConfig) -> Path:
    if run.in_path is None:
        raise InvalidConfig("run.in is required for this command")
    return Path(run.in_path)


# ==================================================================================================
#                                   PIPELINES
# ==================================================================================================


def simulate_dataset(run: RunConfig) -> tuple[Path, Path]:
    """
    Simulate y_1..y_N and write the dataset CSV plus its sidecar.

    Returns
    -------
    tuple[Path, Path]
        (dataset path, sidecar path).

    Usage example
    -------------
        model = LinearModel(kind="fir", order=2, length=10)
        simulate_dataset(RunConfig(model=model, out_path=Path("fir.csv"), seed=7, theta_true=(0.5, 0.25)))
    """
    theta_true = np.asarray(run.theta_true or default_theta_true(run.model.order), dtype=float)
    simulation = simulate(run.model, theta_true, run.seed)
    dataset = write_dataset(run.out_path, simulation.observations)
    sidecar = write_sidecar(dataset, Sidecar(model=run.model, theta_true=theta_true, seed=run.seed))
    LOGGER.info("Simulated %s(%d) | N=%d | seed=%d -> %s", run.model.kind.value, run.model.order, run.model.length, run.seed, dataset)
    return dataset, sidecar


def identify_dataset(run: RunConfig) -> EmReport:
    """
    Run EM on a dataset and write the JSON report.

    The report holds the iterates, log-likelihoods, convergence flag,
    monotonicity warnings, wall-clock time and, when a sidecar exists, the
    simulated theta_true.
    """
    in_path = _require_input(run)
    observations = read_dataset(in_path)
    model = run.model.with_length(len(observations))

    started = time.perf_counter()
    report = identify(model, observations, run.em)
    elapsed = time.perf_counter() - started

    payload: dict[str, Any] = {
        **report.to_dict(),
        "model": model.to_dict(),
        "em": run.em.to_dict(),
        "input": str(in_path),
        "elapsed_seconds": elapsed,
        "seed": run.seed,
    }
    sidecar = read_sidecar(in_path)
    if sidecar is not None:
        payload["theta_true"] = sidecar.theta_true.tolist()
    write_json(run.out_path, payload)
    LOGGER.info(
        "Identified theta=%s | iterations=%d | converged=%s | %.3fs",
        np.array2string(report.theta, precision=6),
        report.iterations_used,
        report.converged,
        elapsed,
    )
    return report


def likelihood_grid_dataset(
    run: RunConfig,
    axes: Sequence[str],
    *,
    progress: bool = False,
) -> Path:
    """Evaluate log p(y | theta) of a dataset over a regular grid and write the CSV."""
    in_path = _require_input(run)
    observations = read_dataset(in_path)
    model = run.model.with_length(len(observations))
    parsed = [parse_axis(text) for text in axes]
    if len(parsed) != model.order:
        raise InvalidConfig(f"grid has {len(parsed)} axes, model.order is {model.order}")
    points = regular_grid(parsed)
    values = likelihood_grid(model, observations, points, progress=progress, tol=run.em.tolerances)
    LOGGER.info("Evaluated %d grid points | best loglik=%.6f", len(points), float(np.max(values)))
    return write_likelihood_grid(run.out_path, points, values)


def sidecar_model(in_path: Path | None) -> Mapping[str, Any] | None:
    """Model mapping recorded next to a dataset, used as a base layer for the model config."""
    if in_path is None:
        return None
    sidecar = read_sidecar(Path(in_path))
    return None if sidecar is None else sidecar.model.to_dict()
