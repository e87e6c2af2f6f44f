"""Configuration model for the FIR and autoregressive state-space models."""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any

import numpy as np

from emfg.config import ProjectConfig, as_float, as_int, require_mapping
from emfg.errors import InvalidConfig
from emfg.messages.gaussian import GaussianMoment, GaussianWeight, check_symmetric_psd, to_weight

X0_PRIOR_CHOICES: tuple[str, ...] = ("proper", "uninformative")


class ModelKind(str, Enum):
    """Which state-space model a section describes."""

    FIR = "fir"
    AR = "ar"

    @classmethod
    def parse(cls, value: Any) -> ModelKind:
        """Accept an enum member or its (case-insensitive) string value."""
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError as exc:
            raise InvalidConfig(f"model.kind must be one of fir, ar; got {value!r}") from exc


def proper_x0_prior(order: int, sigma_u2: float) -> GaussianWeight:
    """N(0, sigma_U^2 I_n) in weight form."""
    return GaussianWeight(np.eye(order) / sigma_u2, np.zeros(order))


def _parse_x0_prior(raw: Any, *, order: int, sigma_u2: float) -> GaussianWeight:
    """Resolve `model.x0_prior` into a weight-form message over R^n."""
    if raw is None or (isinstance(raw, str) and raw.strip().lower() == "proper"):
        return proper_x0_prior(order, sigma_u2)
    if isinstance(raw, str):
        if raw.strip().lower() == "uninformative":
            return GaussianWeight.uninformative(order)
        raise InvalidConfig(f"model.x0_prior must be one of {', '.join(X0_PRIOR_CHOICES)} or a mapping, got {raw!r}")

    mapping = require_mapping(raw, name="model.x0_prior")
    try:
        if "weight" in mapping:
            prior = GaussianWeight(mapping["weight"], mapping.get("weighted_mean", np.zeros(order)))
        elif "cov" in mapping:
            prior = to_weight(GaussianMoment(mapping.get("mean", np.zeros(order)), mapping["cov"]))
        else:
            raise InvalidConfig("model.x0_prior mapping needs either `cov` (with optional `mean`) or `weight`")
        prior.validate()
    except InvalidConfig:
        raise
    except (TypeError, ValueError) as exc:
        raise InvalidConfig(f"model.x0_prior is invalid: {exc}") from exc
    if prior.dim != order:
        raise InvalidConfig(f"model.x0_prior has dimension {prior.dim}, model.order is {order}")
    return prior


@dataclass(frozen=True, slots=True, eq=False)
class LinearModel:
    """
    FIR or AR state-space model with scalar input and scalar noisy output.

    Attributes
    ----------
    kind
        `fir` (state holds the last n inputs, output theta^T X_k + Z_k) or `ar`
        (companion transition, output X_k[0] + Z_k).
    order
        State dimension n.
    length
        Number of observations N.
    sigma_u2
        Input (innovation) variance sigma_U^2.
    sigma_z2
        Observation-noise variance sigma_Z^2.
    x0_prior
        Weight-form prior on X_0. None selects N(0, sigma_U^2 I_n); the all-zero
        weight is the uninformative prior.

    Usage example
    -------------
        model = LinearModel.from_mapping({"kind": "fir", "order": 3, "length": 500, "sigma_z2": 0.1})
        model.x0_prior.weight  # I_3 / sigma_u2
    """

    kind: ModelKind
    order: int
    length: int
    sigma_u2: float = 1.0
    sigma_z2: float = 0.1
    x0_prior: GaussianWeight | None = field(default=None)

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ModelKind.parse(self.kind))
        self.validate()
        if self.x0_prior is None:
            object.__setattr__(self, "x0_prior", proper_x0_prior(self.order, self.sigma_u2))
        elif self.x0_prior.dim != self.order:
            raise InvalidConfig(f"model.x0_prior has dimension {self.x0_prior.dim}, model.order is {self.order}")

    @property
    def n(self) -> int:
        """State dimension."""
        return self.order

    @property
    def N(self) -> int:  # noqa: N802
        """Number of observations."""
        return self.length

    @property
    def prior(self) -> GaussianWeight:
        """The resolved X_0 prior."""
        assert self.x0_prior is not None
        return self.x0_prior

    def validate(self) -> None:
        """Check the scalar fields; raises InvalidConfig naming the field."""
        if self.order < 1:
            raise InvalidConfig(f"model.order must be >= 1, got {self.order}")
        if self.length < 1:
            raise InvalidConfig(f"model.length must be >= 1, got {self.length}")
        for name in ("sigma_u2", "sigma_z2"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise InvalidConfig(f"model.{name} must be > 0, got {value}")
        if self.x0_prior is not None:
            try:
                check_symmetric_psd(self.x0_prior.weight, name="model.x0_prior weight")
            except ValueError as exc:
                raise InvalidConfig(str(exc)) from exc

    def with_length(self, length: int) -> LinearModel:
        """Copy with a different number of observations."""
        return replace(self, length=int(length))

    def x0_is_uninformative(self) -> bool:
        """True when the X_0 prior carries no information at all."""
        return not np.any(self.prior.weight) and not np.any(self.prior.weighted_mean)

    def to_dict(self) -> dict[str, Any]:
        """JSON-ready description used in sidecars and reports."""
        return {
            "kind": self.kind.value,
            "order": self.order,
            "length": self.length,
            "sigma_u2": self.sigma_u2,
            "sigma_z2": self.sigma_z2,
            "x0_prior": {
                "weight": self.prior.weight.tolist(),
                "weighted_mean": self.prior.weighted_mean.tolist(),
            },
        }

    @staticmethod
    def from_mapping(mapping: Mapping[str, Any]) -> LinearModel:
        """
        Build a validated model from a raw `model:` mapping.

        Recognized keys: kind, order, length, sigma_u2, sigma_z2 and x0_prior
        (`proper`, `uninformative`, {mean, cov} or {weight, weighted_mean}).
        """
        mapping = require_mapping(mapping, name="model")
        order = as_int(mapping, "order", 1, prefix="model")
        sigma_u2 = as_float(mapping, "sigma_u2", 1.0, prefix="model")
        kind = ModelKind.parse(mapping.get("kind", ModelKind.FIR.value))
        length = as_int(mapping, "length", 100, prefix="model")
        sigma_z2 = as_float(mapping, "sigma_z2", 0.1, prefix="model")
        # Scalar checks first so a bad order never reaches the prior parser.
        LinearModel(kind=kind, order=order, length=length, sigma_u2=sigma_u2, sigma_z2=sigma_z2)
        prior = _parse_x0_prior(mapping.get("x0_prior"), order=order, sigma_u2=sigma_u2)
        return LinearModel(
            kind=kind,
            order=order,
            length=length,
            sigma_u2=sigma_u2,
            sigma_z2=sigma_z2,
            x0_prior=prior,
        )


def load_linear_model(cfg: ProjectConfig, base: Mapping[str, Any] | None = None, **overrides: Any) -> LinearModel:
    """
    Build the model from the `model` config section with non-None overrides applied.

    `base` (e.g. the model recorded in a dataset sidecar) sits between the
    config section and the overrides. A changed order drops its X_0 prior.

    Usage example
    -------------
        model = load_linear_model(cfg, kind="ar", order=2, length=None)  # length from config
    """
    merged = dict(cfg.section("model"))
    if base is not None:
        base = dict(base)
        if overrides.get("order") is not None and overrides["order"] != base.get("order"):
            base.pop("x0_prior", None)
        merged.update(base)
    merged.update({key: value for key, value in overrides.items() if value is not None})
    return LinearModel.from_mapping(merged)
