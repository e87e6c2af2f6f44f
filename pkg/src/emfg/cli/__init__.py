"""Command-line interface for emfg."""
