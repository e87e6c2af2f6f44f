"""Tests for the `check-tables` command."""

import json
from pathlib import Path

import pytest

from emfg.cli.main import main


def test_selected_cases_pass(config_dir: Path, tmp_path: Path, capsys) -> None:
    """A short run prints the table, writes the summary and returns normally."""
    out = tmp_path / "summary.json"
    main(
        [
            "check-tables",
            "--config",
            str(config_dir / "config.yaml"),
            "--case",
            "marginals/inner_product",
            "--case",
            "fixed_y",
            "--seed",
            "0",
            "--out",
            str(out),
        ]
    )

    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].startswith("case")
    assert len(lines) == 3
    summary = json.loads(out.read_text(encoding="utf-8"))
    assert summary["instances"] == 2
    assert [case["passed"] for case in summary["cases"]] == [True, True]


def test_injected_fault_exits_one_naming_the_case(tmp_path: Path, capsys) -> None:
    """The mutated case fails and is reported on stdout and stderr."""
    with pytest.raises(SystemExit) as excinfo:
        main(
            [
                "check-tables",
                "--instances",
                "2",
                "--case",
                "marginals/autoregression",
                "--inject-fault",
                "marginals/autoregression",
                "--log-file",
                str(tmp_path / "failures.log"),
            ]
        )

    assert excinfo.value.code == 1
    captured = capsys.readouterr()
    failure = json.loads(captured.out.strip().splitlines()[-1])
    assert failure["case"] == "marginals/autoregression"
    assert failure["first_failure"]["case"] == "marginals/autoregression"
    assert "ERROR 1: VerificationFailed" in captured.err
    assert "marginals/autoregression" in captured.err


def test_fixed_seed_prints_identical_summary(capsys) -> None:
    """Two runs with the same seed print the same text."""
    argv = ["check-tables", "--instances", "3", "--case", "marginals/general_matrix", "--seed", "4"]
    main(argv)
    first = capsys.readouterr().out
    main(argv)

    assert capsys.readouterr().out == first
