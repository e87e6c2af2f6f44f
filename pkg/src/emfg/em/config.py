"""Configuration model for the EM loop."""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass
from enum import Enum
from typing import Any

import numpy as np

from emfg.config import ProjectConfig, as_float, as_int, require_mapping
from emfg.errors import InvalidConfig
from emfg.messages.gaussian import GaussianMoment, GaussianWeight, Tolerances, to_weight

DEFAULT_MAX_ITER: int = 50
DEFAULT_TOL: float = 1e-6
THETA_INIT_AUTO: str = "auto"
THETA_INIT_ZEROS: str = "zeros"


class Schedule(str, Enum):
    """Message-update schedule of one EM iteration."""

    BATCH = "batch"
    SERIAL = "serial"


class FirRule(str, Enum):
    """How FIR section messages are computed."""

    FIXED_Y = "fixed_y"
    INNER_PRODUCT = "inner_product"


def _parse_enum(enum_cls: type[Enum], mapping: Mapping[str, Any], key: str, default: Enum) -> Any:
    raw = mapping.get(key, default.value)
    if isinstance(raw, enum_cls):
        return raw
    try:
        return enum_cls(str(raw).strip().lower())
    except ValueError as exc:
        choices = ", ".join(str(item.value) for item in enum_cls)
        raise InvalidConfig(f"em.{key} must be one of {choices}; got {raw!r}") from exc


def _parse_theta_init(raw: Any) -> tuple[float, ...] | str | None:
    if raw is None or (isinstance(raw, str) and raw.strip().lower() == THETA_INIT_AUTO):
        return None
    if isinstance(raw, str) and raw.strip().lower() == THETA_INIT_ZEROS:
        return THETA_INIT_ZEROS
    if isinstance(raw, str):
        raw = [part.strip() for part in raw.split(",") if part.strip()]
    try:
        values = tuple(float(value) for value in np.atleast_1d(np.asarray(raw, dtype=float)))
    except (TypeError, ValueError) as exc:
        raise InvalidConfig(f"em.theta_init must be 'auto', 'zeros' or a list of numbers, got {raw!r}") from exc
    if not values or not all(np.isfinite(values)):
        raise InvalidConfig("em.theta_init must be a non-empty list of finite numbers")
    return values


def _parse_theta_prior(raw: Any) -> GaussianWeight | None:
    if raw is None:
        return None
    mapping = require_mapping(raw, name="em.theta_prior")
    try:
        if "weight" in mapping:
            prior = GaussianWeight(mapping["weight"], mapping["weighted_mean"])
        elif "cov" in mapping and "mean" in mapping:
            prior = to_weight(GaussianMoment(mapping["mean"], mapping["cov"]))
        else:
            raise InvalidConfig("em.theta_prior needs {mean, cov} or {weight, weighted_mean}")
        prior.validate()
    except InvalidConfig:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidConfig(f"em.theta_prior is invalid: {exc}") from exc
    return prior


@dataclass(frozen=True, slots=True, eq=False)
class EmConfig:
    """
    Settings of one EM run.

    Attributes
    ----------
    max_iter
        Maximum number of parameter updates.
    tol
        Stop once ||theta_new - theta|| / max(1, ||theta||) < tol.
    schedule
        `batch` (one full sweep per update) or `serial` (left-to-right running estimate).
    theta_init
        Starting estimate: a vector, `"zeros"`, or None for the model default
        (a moment estimate from the data for FIR, zeros for AR).
    theta_prior
        Optional Gaussian prior on theta, combined with the section messages.
    fir_rule
        `fixed_y` (exact-output multiplier rule) or `inner_product` (general
        inner-product rule with a zero-variance backward output message).
    tolerances
        Numeric tolerances passed to every message operation.

    Usage example
    -------------
        cfg = EmConfig.from_mapping({"max_iter": 100, "tol": 1e-8, "schedule": "serial"})
    """

    max_iter: int = DEFAULT_MAX_ITER
    tol: float = DEFAULT_TOL
    schedule: Schedule = Schedule.BATCH
    theta_init: tuple[float, ...] | str | None = None
    theta_prior: GaussianWeight | None = None
    fir_rule: FirRule = FirRule.FIXED_Y
    tolerances: Tolerances = Tolerances()

    def __post_init__(self) -> None:
        if isinstance(self.theta_init, str):
            object.__setattr__(self, "theta_init", _parse_theta_init(self.theta_init))
        object.__setattr__(self, "schedule", _parse_enum(Schedule, {"schedule": self.schedule}, "schedule", Schedule.BATCH))
        object.__setattr__(self, "fir_rule", _parse_enum(FirRule, {"fir_rule": self.fir_rule}, "fir_rule", FirRule.FIXED_Y))
        self.validate()

    def validate(self) -> None:
        """Check iteration controls; raises InvalidConfig naming the field."""
        if self.max_iter < 1:
            raise InvalidConfig(f"em.max_iter must be >= 1, got {self.max_iter}")
        if not np.isfinite(self.tol) or self.tol <= 0:
            raise InvalidConfig(f"em.tol must be > 0, got {self.tol}")
        if isinstance(self.theta_init, str) and self.theta_init != THETA_INIT_ZEROS:
            raise InvalidConfig(f"em.theta_init must be 'zeros' or a vector, got {self.theta_init!r}")
        self.tolerances.validate()

    def initial_theta(self, order: int) -> np.ndarray:
        """theta_init as a vector of length `order`; zeros unless a vector was given."""
        if self.theta_init is None or self.theta_init == THETA_INIT_ZEROS:
            return np.zeros(order)
        if len(self.theta_init) != order:
            raise InvalidConfig(f"em.theta_init has {len(self.theta_init)} entries, model.order is {order}")
        return np.array(self.theta_init, dtype=float)

    def to_dict(self) -> dict[str, Any]:
        """Iteration settings as recorded in reports."""
        return {
            "max_iter": self.max_iter,
            "tol": self.tol,
            "schedule": self.schedule.value,
            "fir_rule": self.fir_rule.value,
            "theta_init": list(self.theta_init) if isinstance(self.theta_init, tuple) else self.theta_init,
            "has_theta_prior": self.theta_prior is not None,
        }

    @staticmethod
    def from_mapping(mapping: Mapping[str, Any] | None) -> EmConfig:
        """Build a validated EmConfig from a raw `em:` mapping."""
        mapping = require_mapping(mapping, name="em")
        return EmConfig(
            max_iter=as_int(mapping, "max_iter", DEFAULT_MAX_ITER, prefix="em"),
            tol=as_float(mapping, "tol", DEFAULT_TOL, prefix="em"),
            schedule=_parse_enum(Schedule, mapping, "schedule", Schedule.BATCH),
            theta_init=_parse_theta_init(mapping.get("theta_init")),
            theta_prior=_parse_theta_prior(mapping.get("theta_prior")),
            fir_rule=_parse_enum(FirRule, mapping, "fir_rule", FirRule.FIXED_Y),
            tolerances=Tolerances.from_mapping(require_mapping(mapping.get("tolerances"), name="em.tolerances")),
        )


def load_em_config(cfg: ProjectConfig, **overrides: Any) -> EmConfig:
    """EmConfig from the `em` config section with non-None overrides applied."""
    merged = dict(cfg.section("em"))
    merged.update({key: value for key, value in overrides.items() if value is not None})
    return EmConfig.from_mapping(merged)
