"""
Argument groups shared by the subcommands and their resolution into typed configs.

Precedence everywhere: command-line flag > environment (seed only) > dataset
sidecar (model fields, identify and loglik-grid) > project config > defaults.
`--sigma-u` and `--sigma-z` are variances.
"""

from __future__ import annotations

import argparse
from pathlib import Path
from typing import Any

from emfg.config import ProjectConfig
from emfg.em.config import EmConfig, FirRule, Schedule, load_em_config
from emfg.models.config import LinearModel, ModelKind, load_linear_model
from emfg.pipelines import sidecar_model


def add_common_arguments(parser: argparse.ArgumentParser) -> None:
    """--config and --log-level, accepted by every subcommand."""
    parser.add_argument("--config", type=Path, default=None, help="Optional project config YAML.")
    parser.add_argument(
        "--log-level",
        type=str,
        default=None,
        help="DEBUG, INFO, WARNING or ERROR. Defaults to logging.level in the config, else INFO.",
    )


def add_model_arguments(parser: argparse.ArgumentParser, *, with_length: bool) -> None:
    """Model flags; --length only where no dataset fixes N."""
    parser.add_argument("--model", type=str, choices=[kind.value for kind in ModelKind], default=None)
    parser.add_argument("--order", type=int, default=None, help="State dimension n.")
    if with_length:
        parser.add_argument("--length", type=int, default=None, help="Number of observations N.")
    parser.add_argument("--sigma-u", type=float, default=None, help="Input variance sigma_U^2.")
    parser.add_argument("--sigma-z", type=float, default=None, help="Observation-noise variance sigma_Z^2.")


def add_em_arguments(parser: argparse.ArgumentParser) -> None:
    """EM iteration flags."""
    parser.add_argument("--theta", type=str, default=None, help="Initial estimate: a comma list, 'zeros' or 'auto'.")
    parser.add_argument("--max-iter", type=int, default=None)
    parser.add_argument("--tol", type=float, default=None)
    parser.add_argument("--schedule", type=str, choices=[item.value for item in Schedule], default=None)
    parser.add_argument("--fir-rule", type=str, choices=[item.value for item in FirRule], default=None)


def model_from_args(args: argparse.Namespace, cfg: ProjectConfig, *, in_path: Path | None = None) -> LinearModel:
    """Resolve the model, using the sidecar of `in_path` as a base layer when present."""
    overrides: dict[str, Any] = {
        "kind": args.model,
        "order": args.order,
        "length": getattr(args, "length", None),
        "sigma_u2": args.sigma_u,
        "sigma_z2": args.sigma_z,
    }
    return load_linear_model(cfg, base=sidecar_model(in_path), **overrides)


def em_from_args(args: argparse.Namespace, cfg: ProjectConfig) -> EmConfig:
    """Resolve the EM settings."""
    return load_em_config(
        cfg,
        theta_init=args.theta,
        max_iter=args.max_iter,
        tol=args.tol,
        schedule=args.schedule,
        fir_rule=args.fir_rule,
    )
