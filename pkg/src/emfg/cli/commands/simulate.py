"""CLI command that draws a dataset from an FIR or AR model."""

from __future__ import annotations

import argparse
from pathlib import Path
from typing import Any

from emfg.cli.options import add_common_arguments, add_model_arguments, model_from_args
from emfg.config import ProjectConfig
from emfg.pipelines import RunConfig, parse_theta, resolve_seed, simulate_dataset


def add_subparser(subparsers: Any) -> None:
    """Register the `simulate` subcommand."""
    parser = subparsers.add_parser(
        "simulate",
        help="Simulate y_1..y_N and write <out> plus <out-stem>_sidecar.json.",
    )
    add_common_arguments(parser)
    add_model_arguments(parser, with_length=True)
    parser.add_argument(
        "--theta",
        type=str,
        default=None,
        help="True coefficients as a comma list. Defaults to model.theta_true, else 0.5, 0.25, ...",
    )
    parser.add_argument("--seed", type=int, default=None, help="Overrides EMFG_SEED and the config seed.")
    parser.add_argument("--out", type=Path, required=True, help="Dataset CSV to write.")


def run(args: argparse.Namespace, cfg: ProjectConfig) -> None:
    """Execute the `simulate` command."""
    model = model_from_args(args, cfg)
    theta_true = parse_theta(args.theta) or parse_theta(cfg.section("model").get("theta_true"))
    simulate_dataset(
        RunConfig(
            model=model,
            out_path=args.out,
            seed=resolve_seed(args.seed, cfg),
            theta_true=theta_true,
        )
    )
