"""Import smoke tests for package namespaces and the CLI command contract."""

from emfg import checks, cli, em, io, messages, models, oracle
from emfg.cli.types import CliCommand


def test_packages_import() -> None:
    """Top-level package namespaces import without side effects."""
    for package in (checks, cli, em, io, messages, models, oracle):
        assert package is not None


def test_cli_protocol_exposes_expected_methods() -> None:
    """Protocol defines the command contract used by the CLI registry."""
    assert hasattr(CliCommand, "add_subparser")
    assert hasattr(CliCommand, "run")
