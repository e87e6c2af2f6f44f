# ==================================================================================================
#                                   CLI
# ==================================================================================================
#
# Entry point for the `emfg` command-line interface.
#
# This module is a thin dispatcher:
# - parse global + subcommand arguments
# - load project config once
# - call a single library function per subcommand
# - turn every EmfgError into one `ERROR <code>: ...` stderr line and its exit code
#
# Numerical logic lives in `emfg.*` (messages/models/em/oracle), not here.
#
# ==================================================================================================
# Imports
# ==================================================================================================

import argparse
import importlib
import logging
import sys
from collections.abc import Sequence
from typing import NoReturn

from emfg.cli.types import CliCommand
from emfg.config import ProjectConfig, load_project_config
from emfg.errors import EmfgError, InvalidConfig, IoError, format_error_line
from emfg.logging import configure_logging

LOGGER = logging.getLogger(__name__)


# ==================================================================================================
# Command registry
# ==================================================================================================

_COMMANDS: dict[str, str | CliCommand] = {
    "simulate": "emfg.cli.commands.simulate",
    "identify": "emfg.cli.commands.identify",
    "check-tables": "emfg.cli.commands.check_tables",
    "loglik-grid": "emfg.cli.commands.loglik_grid",
}

_COMMAND_HELP: dict[str, str] = {
    "simulate": "draw a dataset from a FIR or AR model",
    "identify": "estimate theta from a dataset with EM",
    "check-tables": "verify the closed-form message tables",
    "loglik-grid": "evaluate log p(y | theta) on a grid",
}

_COMMAND_CONFIG_SECTIONS: dict[str, tuple[str, ...]] = {
    "simulate": ("model",),
    "identify": ("model", "em"),
    "check-tables": ("oracle",),
    "loglik-grid": ("model", "em"),
}


def _resolve_command_module(command: str, module_or_path: str | CliCommand) -> CliCommand:
    """Resolve a command registry entry into a command module."""
    if isinstance(module_or_path, str):
        return importlib.import_module(module_or_path)  # type: ignore[return-value]
    return module_or_path


# ==================================================================================================
# Argument parsing
# ==================================================================================================


class _ArgumentParser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors go through the EmfgError exit path."""

    def error(self, message: str) -> NoReturn:
        raise InvalidConfig(f"{self.prog}: {message}")


def build_arg_parser(selected_command: str | None = None) -> argparse.ArgumentParser:
    """
    Build the top-level CLI parser with subcommands.

    Usage example
    -------------
        emfg simulate --model fir --order 2 --length 500 --seed 7 --out data/fir.csv
        emfg identify --in data/fir.csv --out results/fir_report.json --max-iter 50
        emfg check-tables --seed 0 --instances 100
    """
    parser = _ArgumentParser(
        prog="emfg",
        description="Expectation maximization as Gaussian message passing on factor graphs",
    )

    subparsers = parser.add_subparsers(
        dest="command",
        required=True,
        metavar="<command>",
        title="commands",
    )

    if selected_command is None:
        for name in _COMMANDS:
            subparsers.add_parser(name, help=_COMMAND_HELP.get(name, ""))
        return parser

    module_or_path = _COMMANDS.get(selected_command)
    if module_or_path is None:
        raise InvalidConfig(f"unknown command {selected_command!r}; expected one of: {', '.join(_COMMANDS)}")

    module = _resolve_command_module(selected_command, module_or_path)
    if not hasattr(module, "add_subparser"):
        raise RuntimeError(f"CLI command module for '{selected_command}' is missing add_subparser().")
    module.add_subparser(subparsers)

    return parser


def _log_level(args: argparse.Namespace, cfg: ProjectConfig) -> str:
    if getattr(args, "log_level", None):
        return str(args.log_level)
    return str(cfg.section("logging").get("level", "INFO"))


def _dispatch(argv_list: list[str]) -> None:
    command_name = str(argv_list[0])
    parser = build_arg_parser(command_name)
    args = parser.parse_args(argv_list)

    command_name = str(args.command)
    cfg = load_project_config(
        getattr(args, "config", None),
        sections=_COMMAND_CONFIG_SECTIONS.get(command_name, ()),
    )
    try:
        configure_logging(_log_level(args, cfg))
    except ValueError as exc:
        raise InvalidConfig(f"logging.level: {exc}") from exc

    module = _resolve_command_module(command_name, _COMMANDS[command_name])
    if not hasattr(module, "run"):
        raise RuntimeError(f"CLI command module for '{command_name}' is missing run().")

    LOGGER.debug("Running %s", command_name)
    try:
        module.run(args, cfg)
    except OSError as exc:
        raise IoError(str(exc)) from exc


# ==================================================================================================
# Entry point
# ==================================================================================================


def main(argv: Sequence[str] | None = None) -> None:
    """
    CLI entry point.

    Parameters
    ----------
    argv
        Optional argv for testing. If None, reads from sys.argv.

    Raises
    ------
    SystemExit
        With the error's exit code after printing one `ERROR <code>:` line to stderr.

    Usage example
    -------------
        main(["simulate", "--model", "ar", "--order", "2", "--length", "200", "--out", "ar.csv"])
    """
    argv_list = list(sys.argv[1:] if argv is None else argv)

    if not argv_list or argv_list[0] in {"-h", "--help"}:
        parser = build_arg_parser()
        parser.print_help()
        return

    try:
        _dispatch(argv_list)
    except EmfgError as exc:
        print(format_error_line(exc), file=sys.stderr)
        raise SystemExit(exc.exit_code) from exc


if __name__ == "__main__":
    main()
