"""CLI command that estimates the model coefficients of a dataset with EM."""

from __future__ import annotations

import argparse
from pathlib import Path
from typing import Any

from emfg.cli.options import add_common_arguments, add_em_arguments, add_model_arguments, em_from_args, model_from_args
from emfg.config import ProjectConfig
from emfg.pipelines import RunConfig, identify_dataset, resolve_seed


def add_subparser(subparsers: Any) -> None:
    """Register the `identify` subcommand."""
    parser = subparsers.add_parser(
        "identify",
        help="Run EM on a k,y dataset and write a JSON report (exit 2: unidentifiable, 3: parse error).",
    )
    add_common_arguments(parser)
    add_model_arguments(parser, with_length=False)
    add_em_arguments(parser)
    parser.add_argument("--in", dest="in_path", type=Path, required=True, help="Dataset CSV.")
    parser.add_argument("--out", type=Path, required=True, help="Report JSON to write.")
    parser.add_argument("--seed", type=int, default=None, help="Recorded in the report; EM itself draws no random numbers.")


def run(args: argparse.Namespace, cfg: ProjectConfig) -> None:
    """Execute the `identify` command."""
    model = model_from_args(args, cfg, in_path=args.in_path)
    identify_dataset(
        RunConfig(
            model=model,
            em=em_from_args(args, cfg),
            in_path=args.in_path,
            out_path=args.out,
            seed=resolve_seed(args.seed, cfg, section="em"),
        )
    )
