"""
Exception hierarchy and policy-driven step execution.

Every failure the library raises on purpose derives from `EmfgError` and
carries the process exit code the CLI reports for it. `run_step` wraps the
instances of batch jobs such as the check-tables suite: under a debug policy
an exception propagates, otherwise it is recorded as a `StepFailure` and the
batch moves on.
"""

import json
import logging
import traceback
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, ClassVar, Generic, Optional, TypeVar

# ==================================================================================================
#                                   EXCEPTIONS
# ==================================================================================================


class EmfgError(Exception):
    """Base class of all domain errors; `exit_code` is what the CLI exits with."""

    exit_code: ClassVar[int] = 1


class DimensionMismatch(EmfgError, ValueError):
    """Operands of a message operation have incompatible shapes."""


class LinearAlgebraError(EmfgError):
    """A required matrix inverse or factorization does not exist numerically."""


class SingularCovariance(LinearAlgebraError):
    """A covariance matrix that must be inverted is singular."""


class DegenerateMessage(LinearAlgebraError):
    """A singular weight matrix cannot be converted to moment form."""


class SingularSystem(LinearAlgebraError):
    """An intermediate linear system of a message update is singular."""


class SingularNoise(LinearAlgebraError):
    """The noise weight W_Z = V_Z^-1 is required but V_Z is singular."""


class UnidentifiableParameter(LinearAlgebraError):
    """The combined parameter weight is singular, so the argmax is not unique."""

    exit_code: ClassVar[int] = 2


class IllConditionedFit(EmfgError):
    """The quadratic fit of a numeric EM message has a residual above tolerance."""


class VerificationFailed(EmfgError):
    """At least one case of the table verification suite exceeded its tolerance."""


class DatasetParseError(EmfgError):
    """A dataset or sidecar file could not be parsed."""

    exit_code: ClassVar[int] = 3


class InvalidConfig(EmfgError, ValueError):
    """A configuration field is missing or out of range."""

    exit_code: ClassVar[int] = 4


class IoError(EmfgError):
    """Reading or writing a file failed."""

    exit_code: ClassVar[int] = 5


def format_error_line(exc: BaseException) -> str:
    """
    Render the single machine-parsable stderr line for an error.

    Usage example
    -------------
        format_error_line(UnidentifiableParameter("weight singular"))
        # 'ERROR 2: UnidentifiableParameter: weight singular'
    """
    code = exc.exit_code if isinstance(exc, EmfgError) else 1
    message = " ".join(str(exc).split())
    return f"ERROR {code}: {type(exc).__name__}: {message}"


# ==================================================================================================
#                                   STEP EXECUTION
# ==================================================================================================

T = TypeVar("T")

STEP_LOGGER_NAME = "emfg.steps"
_FILE_FORMAT = "%(asctime)s | %(levelname)s | %(message)s"


@dataclass(frozen=True)
class ErrorPolicy:
    """
    How `run_step` treats an exception.

    debug=True re-raises at once; otherwise the exception becomes a
    `StepFailure` and the batch continues. `log_path` adds a file log of the
    failures next to the module logger.
    """

    debug: bool
    log_path: Optional[Path] = None


@dataclass(frozen=True)
class StepFailure:
    """
    One captured exception.

    `context` holds what is needed to replay the step, for the check-tables
    suite the case name, instance index, seed and serialized node inputs.
    """

    step: str
    context: dict[str, Any]
    exc_type: str
    message: str
    traceback: str
    timestamp_utc: str

    @property
    def summary(self) -> str:
        """`<ExceptionName>: <message>` on one line."""
        return f"{self.exc_type}: {' '.join(self.message.split())}"


@dataclass(frozen=True)
class StepResult(Generic[T]):
    """
    Either the step's return value or its failure.

    Usage example
    -------------
        result = run_step(policy, "marginals/inner_product#3", {"seed": 3}, check, instance)
        error = result.value if result.failure is None else float("inf")
    """

    value: Optional[T]
    failure: Optional[StepFailure]


def make_logger(*, log_path: Optional[Path]) -> logging.Logger:
    """
    The step logger, with at most one file handler per `log_path`.

    Calling it again with the same path (every instance of a suite does)
    attaches nothing new.
    """
    logger = logging.getLogger(STEP_LOGGER_NAME)
    if log_path is None:
        return logger

    target = str(log_path.resolve())
    if any(isinstance(h, logging.FileHandler) and h.baseFilename == target for h in logger.handlers):
        return logger

    log_path.parent.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(log_path, encoding="utf-8")
    handler.setLevel(logging.INFO)
    handler.setFormatter(logging.Formatter(fmt=_FILE_FORMAT, datefmt="%Y-%m-%d %H:%M:%S"))
    logger.addHandler(handler)
    logger.setLevel(logging.INFO)
    return logger


def run_step(
    policy: ErrorPolicy,
    step: str,
    context: dict[str, Any],
    func: Callable[..., T],
    *args: Any,
    **kwargs: Any,
) -> StepResult[T]:
    """
    Call `func(*args, **kwargs)` under `policy`.

    The failure is logged with its context as sorted JSON before the debug
    policy re-raises, so a failing instance is always on record.

    Usage example
    -------------
        policy = ErrorPolicy(debug=False, log_path=Path("checks.log"))
        result = run_step(policy, "fixed_y#0", {"seed": 0}, check_fixed_y, instance)
    """
    logger = make_logger(log_path=policy.log_path)
    try:
        return StepResult(value=func(*args, **kwargs), failure=None)
    except Exception as exc:  # noqa: BLE001 (boundary catch)
        failure = StepFailure(
            step=step,
            context=context,
            exc_type=type(exc).__name__,
            message=str(exc),
            traceback=traceback.format_exc(),
            timestamp_utc=datetime.now(timezone.utc).isoformat(),
        )
        logger.error("%s failed | %s", step, failure.summary)
        logger.error("context=%s", json.dumps(context, sort_keys=True, default=str))
        logger.debug("traceback=%s", failure.traceback)
        if policy.debug:
            raise
        return StepResult(value=None, failure=failure)
