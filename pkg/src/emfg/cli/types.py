"""
Shared CLI typing contracts.

This module defines the protocol the dispatcher uses to type check command
modules without importing concrete implementations at type time.
"""

import argparse
from typing import Any, Protocol

from emfg.config import ProjectConfig

# ==================================================================================================
#                                   TYPES
# ==================================================================================================


class CliCommand(Protocol):
    """
    Structural interface for CLI subcommand modules.

    Any module registered in `emfg.cli.main._COMMANDS` implements:
    - `add_subparser(...)` registers CLI arguments.
    - `run(...)` executes the command after argument parsing + config load.
    """

    def add_subparser(self, subparsers: Any) -> None: ...
    def run(self, args: argparse.Namespace, cfg: ProjectConfig) -> None: ...
