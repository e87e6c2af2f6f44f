"""Tests for global logging bootstrap behavior."""

import logging
from typing import Any

import pytest

from emfg.logging import configure_logging


def test_configure_logging_calls_basic_config_with_expected_arguments(monkeypatch) -> None:
    """Bootstrap delegates to `logging.basicConfig`; level names are resolved."""
    captured: dict[str, Any] = {}

    def _fake_basic_config(**kwargs: Any) -> None:
        captured.update(kwargs)

    monkeypatch.setattr(logging, "basicConfig", _fake_basic_config)

    configure_logging(level="debug")

    assert captured["level"] == logging.DEBUG
    assert "%(asctime)s" in captured["format"]


def test_configure_logging_rejects_unknown_level_name() -> None:
    """Unknown names are a ValueError for the CLI to report."""
    with pytest.raises(ValueError, match="Unknown logging level"):
        configure_logging("LOUD")
