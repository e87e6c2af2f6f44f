"""CLI command that runs the closed-form vs oracle verification suite."""

from __future__ import annotations

import argparse
import json
from dataclasses import replace
from pathlib import Path
from typing import Any

from emfg.checks.tables import CASE_NAMES, CheckSuiteConfig, format_summary, run_suite
from emfg.config import ProjectConfig
from emfg.cli.options import add_common_arguments
from emfg.errors import ErrorPolicy, VerificationFailed
from emfg.io.datasets import write_json
from emfg.pipelines import resolve_seed


def add_subparser(subparsers: Any) -> None:
    """Register the `check-tables` subcommand."""
    parser = subparsers.add_parser(
        "check-tables",
        help="Compare every closed-form message with its brute-force reference (exit 1 on any failure).",
    )
    add_common_arguments(parser)
    parser.add_argument("--seed", type=int, default=None, help="Overrides EMFG_SEED and the config seed.")
    parser.add_argument("--instances", type=int, default=None, help="Random instances per case (default 100).")
    parser.add_argument(
        "--case",
        dest="cases",
        action="append",
        choices=CASE_NAMES,
        default=None,
        help="Run only this case; repeatable. Defaults to all cases.",
    )
    parser.add_argument(
        "--inject-fault",
        type=str,
        choices=CASE_NAMES,
        default=None,
        help="Flip the sign of the cross-covariance term in one case (suite self-test).",
    )
    parser.add_argument("--out", type=Path, default=None, help="Optional JSON summary to write.")
    parser.add_argument("--log-file", type=Path, default=None, help="Append per-instance failures to this log.")
    parser.add_argument("--debug", action="store_true", help="Stop at the first exception instead of recording it.")
    parser.add_argument("--progress", action="store_true", help="Show a progress bar per case.")


def run(args: argparse.Namespace, cfg: ProjectConfig) -> None:
    """Execute the `check-tables` command."""
    suite = CheckSuiteConfig.from_mapping(cfg.section("oracle"))
    suite = replace(
        suite,
        seed=resolve_seed(args.seed, cfg, section="oracle"),
        instances=suite.instances if args.instances is None else int(args.instances),
        inject_fault=args.inject_fault,
    )
    policy = ErrorPolicy(debug=bool(args.debug), log_path=args.log_file)
    summaries = run_suite(suite, policy, cases=tuple(args.cases or CASE_NAMES), progress=bool(args.progress))

    print(format_summary(summaries))
    failing = [summary for summary in summaries if not summary.passed]
    for summary in failing:
        print(json.dumps({"case": summary.name, "first_failure": summary.failures[0]}, sort_keys=True))

    if args.out is not None:
        write_json(
            args.out,
            {
                "seed": suite.seed,
                "instances": suite.instances,
                "cases": [
                    {
                        "name": summary.name,
                        "max_rel_error": summary.max_error,
                        "tolerance": summary.tolerance,
                        "passed": summary.passed,
                        "failures": summary.failures,
                    }
                    for summary in summaries
                ],
            },
        )

    if failing:
        names = ", ".join(summary.name for summary in failing)
        raise VerificationFailed(f"{len(failing)} case(s) failed: {names}")
