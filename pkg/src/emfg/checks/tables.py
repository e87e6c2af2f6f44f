# ==================================================================================================
#                               Table verification suite
# ==================================================================================================
#
# Compares every closed-form message against an independent brute-force
# reference on seeded random instances:
#
#   marginals/<kind>    `marginals` vs dense joint conditioning     (default tol 1e-9)
#   em_message/<kind>   `em_message` vs quadrature of the EM rule   (default tol 1e-6)
#   fixed_y             exact-output rule vs inner-product rule     (default tol 1e-10)
#
# Errors are max-abs differences divided by max(1, max-abs reference value).
# Each instance runs through `run_step`, so an exception in one instance is
# recorded with its serialized inputs instead of aborting the suite. A case
# passes when every instance ran and stayed within tolerance.

from __future__ import annotations

import logging
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np
from tqdm.auto import tqdm

from emfg.config import as_float, as_int, require_mapping
from emfg.errors import ErrorPolicy, InvalidConfig, run_step
from emfg.messages.gaussian import GaussianMoment
from emfg.messages.multipliers import (
    MultiplierKind,
    MultiplierMarginals,
    MultiplierSpec,
    em_message,
    em_message_fixed_y,
    marginals,
)
from emfg.oracle.joint import condition_joint
from emfg.oracle.quadrature import QuadratureGrid, em_message_quadrature

LOGGER = logging.getLogger(__name__)

FIXED_Y_CASE: str = "fixed_y"
CASE_NAMES: tuple[str, ...] = (
    *(f"marginals/{kind.value}" for kind in MultiplierKind),
    *(f"em_message/{kind.value}" for kind in MultiplierKind),
    FIXED_Y_CASE,
)


# ==================================================================================================
#                                   CONFIG
# ==================================================================================================


@dataclass(frozen=True, slots=True)
class CheckSuiteConfig:
    """
    Settings of the verification suite (the `oracle:` config section).

    Usage example
    -------------
        suite = CheckSuiteConfig.from_mapping({"instances": 20, "seed": 1})
    """

    instances: int = 100
    seed: int = 0
    marginals_tol: float = 1e-9
    message_tol: float = 1e-6
    fixed_y_tol: float = 1e-10
    grid: QuadratureGrid = field(default_factory=QuadratureGrid)
    inject_fault: str | None = None

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        """Check counts, tolerances and the fault name."""
        if self.instances < 1:
            raise InvalidConfig(f"oracle.instances must be >= 1, got {self.instances}")
        for name in ("marginals_tol", "message_tol", "fixed_y_tol"):
            if not getattr(self, name) > 0:
                raise InvalidConfig(f"oracle.{name} must be > 0")
        if self.inject_fault is not None and self.inject_fault not in CASE_NAMES:
            raise InvalidConfig(f"unknown case {self.inject_fault!r}; expected one of: {', '.join(CASE_NAMES)}")

    @staticmethod
    def from_mapping(mapping: Mapping[str, Any] | None) -> CheckSuiteConfig:
        """Build from the raw `oracle:` mapping."""
        mapping = require_mapping(mapping, name="oracle")
        return CheckSuiteConfig(
            instances=as_int(mapping, "instances", 100, prefix="oracle"),
            seed=as_int(mapping, "seed", 0, prefix="oracle"),
            marginals_tol=as_float(mapping, "marginals_tol", 1e-9, prefix="oracle"),
            message_tol=as_float(mapping, "message_tol", 1e-6, prefix="oracle"),
            fixed_y_tol=as_float(mapping, "fixed_y_tol", 1e-10, prefix="oracle"),
            grid=QuadratureGrid.from_mapping(mapping),
        )


# ==================================================================================================
#                                   RANDOM INSTANCES
# ==================================================================================================


@dataclass(frozen=True, slots=True, eq=False)
class NodeInstance:
    """One random multiplier node with incoming messages."""

    spec: MultiplierSpec
    theta: np.ndarray
    fwd_x: GaussianMoment
    bwd_y: GaussianMoment

    def to_dict(self) -> dict[str, Any]:
        """Inputs needed to reproduce the instance."""
        noise = self.spec.noise
        return {
            "kind": self.spec.kind.value,
            "n": self.spec.n,
            "m": self.spec.m,
            "noise": noise if isinstance(noise, float) else noise.tolist(),
            "theta": self.theta.tolist(),
            "fwd_mean": self.fwd_x.mean.tolist(),
            "fwd_cov": self.fwd_x.cov.tolist(),
            "bwd_mean": self.bwd_y.mean.tolist(),
            "bwd_cov": self.bwd_y.cov.tolist(),
        }


def random_spd(rng: np.random.Generator, dim: int, floor: float = 0.5) -> np.ndarray:
    """Random symmetric positive definite matrix with eigenvalues >= floor."""
    factor = rng.normal(size=(dim, dim))
    return factor @ factor.T / dim + floor * np.eye(dim)


def random_instance(kind: MultiplierKind, rng: np.random.Generator, max_dim: int = 2) -> NodeInstance:
    """Draw node dimensions, noise, theta and both incoming messages."""
    n = int(rng.integers(1, max_dim + 1))
    if kind is MultiplierKind.INNER_PRODUCT:
        m = 1
    elif kind is MultiplierKind.GENERAL_MATRIX:
        m = int(rng.integers(1, max_dim + 1))
    else:
        m = n

    if kind in (MultiplierKind.INNER_PRODUCT, MultiplierKind.AUTOREGRESSION):
        noise: Any = float(rng.uniform(0.5, 2.0))
    else:
        noise = random_spd(rng, m)
    spec = MultiplierSpec.create(kind, n=n, m=m, noise=noise)
    return NodeInstance(
        spec=spec,
        theta=rng.normal(size=spec.param_dim),
        fwd_x=GaussianMoment(rng.normal(size=n), random_spd(rng, n)),
        bwd_y=GaussianMoment(rng.normal(size=m), random_spd(rng, m)),
    )


def relative_error(actual: Sequence[np.ndarray], expected: Sequence[np.ndarray]) -> float:
    """Largest max-abs difference over the pairs, each scaled by max(1, max-abs expected)."""
    worst = 0.0
    for a, e in zip(actual, expected, strict=True):
        a = np.asarray(a, dtype=float)
        e = np.asarray(e, dtype=float)
        scale = max(1.0, float(np.max(np.abs(e), initial=0.0)))
        worst = max(worst, float(np.max(np.abs(a - e), initial=0.0)) / scale)
    return worst


def _marginal_arrays(marg: MultiplierMarginals) -> tuple[np.ndarray, ...]:
    return marg.m_x, marg.m_y, marg.v_x, marg.v_xyt


def _corrupt(marg: MultiplierMarginals) -> MultiplierMarginals:
    # Flips m_x too: with an exact output v_xyt is zero and its sign change is invisible.
    return replace(marg, m_x=-marg.m_x, v_xyt=-marg.v_xyt)


# ==================================================================================================
#                                   CASE CHECKS
# ==================================================================================================


def check_marginals(instance: NodeInstance, *, fault: bool = False) -> float:
    """Relative error of `marginals` against dense conditioning."""
    closed = marginals(instance.spec, instance.theta, instance.fwd_x, instance.bwd_y)
    if fault:
        closed = _corrupt(closed)
    reference = condition_joint(instance.spec, instance.theta, instance.fwd_x, instance.bwd_y)
    return relative_error(_marginal_arrays(closed), _marginal_arrays(reference))


def check_em_message(instance: NodeInstance, grid: QuadratureGrid, *, fault: bool = False) -> float:
    """Relative error of `em_message` against the quadrature fit."""
    marg = marginals(instance.spec, instance.theta, instance.fwd_x, instance.bwd_y)
    if fault:
        marg = _corrupt(marg)
    closed = em_message(instance.spec, marg)
    numeric = em_message_quadrature(instance.spec, instance.theta, instance.fwd_x, instance.bwd_y, grid)
    return relative_error(
        (closed.weight, closed.weighted_mean),
        (numeric.weight, numeric.weighted_mean),
    )


def check_fixed_y(instance: NodeInstance, *, fault: bool = False) -> float:
    """Relative error between the exact-output rule and the inner-product rule with zero output variance."""
    spec = instance.spec
    y_value = float(instance.bwd_y.mean[0])
    exact = GaussianMoment([y_value], [[0.0]])
    marg = marginals(spec, instance.theta, instance.fwd_x, exact)
    if fault:
        marg = _corrupt(marg)
    general = em_message(spec, marg)
    fixed = em_message_fixed_y(instance.fwd_x, y_value, spec.sigma2, instance.theta)
    return relative_error((fixed.weight, fixed.weighted_mean), (general.weight, general.weighted_mean))


# ==================================================================================================
#                                   SUITE
# ==================================================================================================


@dataclass(slots=True)
class CaseSummary:
    """Outcome of one case over all its instances."""

    name: str
    tolerance: float
    instances: int = 0
    max_error: float = 0.0
    failures: list[dict[str, Any]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        """True when every instance ran and stayed within tolerance."""
        return not self.failures and self.max_error <= self.tolerance


def _case_plan(name: str, suite: CheckSuiteConfig) -> tuple[MultiplierKind, float, Callable[[NodeInstance], float]]:
    fault = suite.inject_fault == name
    if name == FIXED_Y_CASE:
        return MultiplierKind.INNER_PRODUCT, suite.fixed_y_tol, lambda inst: check_fixed_y(inst, fault=fault)
    family, kind_value = name.split("/")
    kind = MultiplierKind(kind_value)
    if family == "marginals":
        return kind, suite.marginals_tol, lambda inst: check_marginals(inst, fault=fault)
    return kind, suite.message_tol, lambda inst: check_em_message(inst, suite.grid, fault=fault)


def run_case(
    name: str,
    suite: CheckSuiteConfig,
    policy: ErrorPolicy,
    *,
    progress: bool = False,
) -> CaseSummary:
    """Run all instances of one case with a case-specific deterministic RNG stream."""
    kind, tolerance, check = _case_plan(name, suite)
    rng = np.random.default_rng([suite.seed, CASE_NAMES.index(name)])
    summary = CaseSummary(name=name, tolerance=tolerance)
    for index in tqdm(range(suite.instances), desc=name, disable=not progress, leave=False):
        instance = random_instance(kind, rng)
        context = {"case": name, "instance": index, "seed": suite.seed, "inputs": instance.to_dict()}
        result = run_step(policy, f"{name}#{index}", context, check, instance)
        summary.instances += 1
        if result.failure is not None:
            summary.failures.append({**context, "error": result.failure.summary})
            continue
        error = float(result.value)  # type: ignore[arg-type]
        summary.max_error = max(summary.max_error, error)
        if error > tolerance:
            summary.failures.append({**context, "error": f"relative error {error:.3e} exceeds {tolerance:.0e}"})
    LOGGER.info("Case %s | instances=%d | max_rel_error=%.3e", name, summary.instances, summary.max_error)
    return summary


def run_suite(
    suite: CheckSuiteConfig,
    policy: ErrorPolicy | None = None,
    *,
    cases: Sequence[str] = CASE_NAMES,
    progress: bool = False,
) -> list[CaseSummary]:
    """
    Run the selected cases in a fixed order.

    Usage example
    -------------
        summaries = run_suite(CheckSuiteConfig(instances=10))
        all(summary.passed for summary in summaries)
    """
    policy = policy or ErrorPolicy(debug=False)
    unknown = [name for name in cases if name not in CASE_NAMES]
    if unknown:
        raise InvalidConfig(f"unknown check case(s): {', '.join(unknown)}")
    return [run_case(name, suite, policy, progress=progress) for name in cases]


def format_summary(summaries: Sequence[CaseSummary]) -> str:
    """Fixed-width, deterministic summary table."""
    width = max(len(summary.name) for summary in summaries)
    lines = [f"{'case':<{width}}  {'instances':>9}  {'max_rel_error':>13}  {'tolerance':>9}  status"]
    for summary in summaries:
        status = "ok" if summary.passed else "FAIL"
        lines.append(
            f"{summary.name:<{width}}  {summary.instances:>9d}  {summary.max_error:>13.3e}"
            f"  {summary.tolerance:>9.0e}  {status}"
        )
    return "\n".join(lines)
