"""Tests for the `identify` command."""

import json
from pathlib import Path

import pytest

from emfg.cli.main import main


@pytest.fixture
def dataset(config_dir: Path, tmp_path: Path) -> Path:
    """Small FIR dataset with sidecar."""
    out = tmp_path / "data" / "fir.csv"
    main(["simulate", "--config", str(config_dir / "config.yaml"), "--length", "60", "--seed", "1", "--out", str(out)])
    return out


def test_single_iteration_report(config_dir: Path, dataset: Path, tmp_path: Path) -> None:
    """--max-iter 1 records the initial estimate and one update."""
    report_path = tmp_path / "report.json"
    main(["identify", "--config", str(config_dir / "config.yaml"), "--in", str(dataset), "--out", str(report_path), "--max-iter", "1"])

    report = json.loads(report_path.read_text(encoding="utf-8"))
    assert report["schema"] == 1
    assert len(report["iterates"]) == 2
    assert len(report["log_liks"]) == 2
    assert report["iterations_used"] == 1
    assert report["theta_true"] == [0.5, 0.25]
    assert report["model"]["length"] == 60
    assert report["em"]["max_iter"] == 1


def test_seed_is_recorded_and_does_not_change_the_estimate(config_dir: Path, dataset: Path, tmp_path: Path) -> None:
    """--seed lands in the report; the iterates are the same for any seed."""
    reports = []
    for seed in ("3", "4"):
        report_path = tmp_path / f"seed{seed}.json"
        main(["identify", "--config", str(config_dir / "config.yaml"), "--in", str(dataset), "--out", str(report_path), "--seed", seed])
        reports.append(json.loads(report_path.read_text(encoding="utf-8")))

    assert [report["seed"] for report in reports] == [3, 4]
    assert reports[0]["iterates"] == reports[1]["iterates"]


def test_config_iterations_and_serial_schedule(config_dir: Path, dataset: Path, tmp_path: Path) -> None:
    """em.yaml supplies max_iter; --schedule selects the serial loop."""
    report_path = tmp_path / "serial.json"
    main(["identify", "--config", str(config_dir / "config.yaml"), "--in", str(dataset), "--out", str(report_path), "--schedule", "serial"])

    report = json.loads(report_path.read_text(encoding="utf-8"))
    assert report["schedule"] == "serial"
    assert report["iterations_used"] <= 5


def test_malformed_row_exits_with_parse_code(tmp_path: Path, capsys) -> None:
    """A bad y value exits 3 and names the line."""
    data = tmp_path / "bad.csv"
    data.write_text("k,y\n1,0.5\n2,oops\n", encoding="utf-8")

    with pytest.raises(SystemExit) as excinfo:
        main(["identify", "--in", str(data), "--out", str(tmp_path / "r.json")])

    assert excinfo.value.code == 3
    err = capsys.readouterr().err.strip().splitlines()[-1]
    assert err.startswith("ERROR 3: DatasetParseError:")
    assert "line 3" in err


def test_missing_input_exits_with_io_code(tmp_path: Path, capsys) -> None:
    """An absent dataset exits 5."""
    with pytest.raises(SystemExit) as excinfo:
        main(["identify", "--in", str(tmp_path / "absent.csv"), "--out", str(tmp_path / "r.json")])

    assert excinfo.value.code == 5
    assert capsys.readouterr().err.strip().splitlines()[-1].startswith("ERROR 5: IoError:")
