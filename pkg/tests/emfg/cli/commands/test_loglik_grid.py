"""Tests for the `loglik-grid` command."""

from pathlib import Path

import pandas as pd
import pytest

from emfg.cli.main import main


def test_grid_csv_has_one_row_per_point(config_dir: Path, tmp_path: Path) -> None:
    """Two axes of 3 and 2 points give six rows, maximal near theta_true."""
    data = tmp_path / "fir.csv"
    main(["simulate", "--config", str(config_dir / "config.yaml"), "--theta", "0.6,0.3", "--length", "200", "--out", str(data)])

    out = tmp_path / "grid.csv"
    main(["loglik-grid", "--in", str(data), "--grid", "0:0.6:3", "--grid", "0:0.3:2", "--out", str(out)])

    table = pd.read_csv(out)
    assert list(table.columns) == ["theta_1", "theta_2", "loglik"]
    assert len(table) == 6
    best = table.loc[table["loglik"].idxmax()]
    assert (best["theta_1"], best["theta_2"]) == pytest.approx((0.6, 0.3), abs=1e-12)


def test_axis_count_must_match_order(config_dir: Path, tmp_path: Path, capsys) -> None:
    """One axis for a second-order model exits 4."""
    data = tmp_path / "fir.csv"
    main(["simulate", "--config", str(config_dir / "config.yaml"), "--out", str(data)])

    with pytest.raises(SystemExit) as excinfo:
        main(["loglik-grid", "--in", str(data), "--grid", "0:1:3", "--out", str(tmp_path / "g.csv")])

    assert excinfo.value.code == 4
    assert "axes" in capsys.readouterr().err
