"""Subcommand modules registered in `emfg.cli.main`."""
