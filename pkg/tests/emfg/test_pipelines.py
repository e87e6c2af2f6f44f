"""Tests for run resolution helpers and the end-to-end pipelines."""

import json
from pathlib import Path

import numpy as np
import pytest

from emfg.config import ProjectConfig
from emfg.em.config import EmConfig
from emfg.errors import InvalidConfig
from emfg.models.config import LinearModel
from emfg.pipelines import (
    RunConfig,
    default_theta_true,
    identify_dataset,
    parse_theta,
    resolve_seed,
    simulate_dataset,
)


def test_resolve_seed_precedence(monkeypatch) -> None:
    """Flag, environment, section seed, top-level seed, then 0."""
    cfg = ProjectConfig(raw={"seed": 3, "oracle": {"seed": 8}})

    assert resolve_seed(1, cfg, section="oracle") == 1
    assert resolve_seed(None, cfg, section="oracle") == 8
    assert resolve_seed(None, cfg) == 3
    assert resolve_seed(None, ProjectConfig()) == 0
    monkeypatch.setenv("EMFG_SEED", "42")
    assert resolve_seed(None, cfg, section="oracle") == 42
    monkeypatch.setenv("EMFG_SEED", "abc")
    with pytest.raises(InvalidConfig, match="EMFG_SEED"):
        resolve_seed(None, cfg)


def test_parse_theta_forms() -> None:
    """Strings, scalars and sequences become float tuples."""
    assert parse_theta("0.5, -1") == (0.5, -1.0)
    assert parse_theta(0.25) == (0.25,)
    assert parse_theta([1, 2]) == (1.0, 2.0)
    assert parse_theta(None) is None
    with pytest.raises(InvalidConfig):
        parse_theta("a,b")
    with pytest.raises(InvalidConfig):
        parse_theta("nan")


def test_default_theta_true_halves() -> None:
    """0.5, 0.25, 0.125, ..."""
    assert default_theta_true(3) == (0.5, 0.25, 0.125)


def test_simulate_then_identify(tmp_path: Path) -> None:
    """A simulated AR dataset is recovered close to its coefficients."""
    model = LinearModel.from_mapping({"kind": "ar", "order": 2, "length": 400, "sigma_z2": 0.05})
    dataset, sidecar = simulate_dataset(RunConfig(model=model, out_path=tmp_path / "ar.csv", seed=2, theta_true=(0.5, -0.3)))

    assert sidecar.name == "ar_sidecar.json"
    report = identify_dataset(
        RunConfig(model=model, em=EmConfig(max_iter=100, tol=1e-8), in_path=dataset, out_path=tmp_path / "report.json")
    )

    assert np.linalg.norm(report.theta - np.array([0.5, -0.3])) < 0.15
    payload = json.loads((tmp_path / "report.json").read_text(encoding="utf-8"))
    assert payload["theta_true"] == [0.5, -0.3]
    assert payload["elapsed_seconds"] >= 0.0


def test_run_config_validation(tmp_path: Path) -> None:
    """theta_true must match the model order and identify needs an input."""
    model = LinearModel.from_mapping({"order": 2, "length": 5})
    with pytest.raises(InvalidConfig, match="run.theta"):
        RunConfig(model=model, out_path=tmp_path / "y.csv", theta_true=(1.0,))
    with pytest.raises(InvalidConfig, match="run.in"):
        identify_dataset(RunConfig(model=model, out_path=tmp_path / "r.json"))
