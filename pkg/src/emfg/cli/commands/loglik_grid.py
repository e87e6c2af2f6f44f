"""CLI command that tabulates the log-likelihood of a dataset over a parameter grid."""

from __future__ import annotations

import argparse
from pathlib import Path
from typing import Any

from emfg.cli.options import add_common_arguments, add_model_arguments, model_from_args
from emfg.config import ProjectConfig
from emfg.em.config import load_em_config
from emfg.pipelines import RunConfig, likelihood_grid_dataset


def add_subparser(subparsers: Any) -> None:
    """Register the `loglik-grid` subcommand."""
    parser = subparsers.add_parser(
        "loglik-grid",
        help="Write theta_1..theta_n,loglik over a regular grid.",
    )
    add_common_arguments(parser)
    add_model_arguments(parser, with_length=False)
    parser.add_argument(
        "--grid",
        action="append",
        required=True,
        metavar="START:STOP:NUM",
        help="One axis per coefficient, in order; repeat the flag n times.",
    )
    parser.add_argument("--in", dest="in_path", type=Path, required=True, help="Dataset CSV.")
    parser.add_argument("--out", type=Path, required=True, help="Grid CSV to write.")
    parser.add_argument("--progress", action="store_true", help="Show a progress bar.")


def run(args: argparse.Namespace, cfg: ProjectConfig) -> None:
    """Execute the `loglik-grid` command."""
    likelihood_grid_dataset(
        RunConfig(
            model=model_from_args(args, cfg, in_path=args.in_path),
            em=load_em_config(cfg),
            in_path=args.in_path,
            out_path=args.out,
        ),
        args.grid,
        progress=bool(args.progress),
    )
