"""Tests for configuration loading behavior."""

from pathlib import Path

import pytest

from emfg.config import ProjectConfig, as_int, load_project_config
from emfg.errors import InvalidConfig


def test_load_project_config_returns_project_config(tmp_path: Path) -> None:
    """A valid YAML mapping is returned as `ProjectConfig.raw`."""
    cfg_path = tmp_path / "config.yaml"
    cfg_path.write_text("project:\n  name: demo\n", encoding="utf-8")

    cfg = load_project_config(cfg_path)

    assert isinstance(cfg, ProjectConfig)
    assert cfg.raw["project"]["name"] == "demo"


def test_missing_path_gives_empty_config() -> None:
    """No config file means every default applies."""
    cfg = load_project_config(None, sections=("em",))

    assert cfg.raw == {}
    assert cfg.section("em") == {}


def test_load_project_config_rejects_non_mapping_top_level(tmp_path: Path) -> None:
    """Top-level YAML must be a mapping."""
    cfg_path = tmp_path / "bad.yaml"
    cfg_path.write_text("- a\n- b\n", encoding="utf-8")

    with pytest.raises(InvalidConfig, match="Config must be a mapping"):
        load_project_config(cfg_path)


def test_missing_file_and_bad_yaml_are_config_errors(tmp_path: Path) -> None:
    """Both surface as InvalidConfig."""
    with pytest.raises(InvalidConfig, match="not found"):
        load_project_config(tmp_path / "absent.yaml")

    broken = tmp_path / "broken.yaml"
    broken.write_text("em: [unclosed\n", encoding="utf-8")
    with pytest.raises(InvalidConfig, match="not valid YAML"):
        load_project_config(broken)


def test_sibling_sections_only_when_requested(config_dir: Path) -> None:
    """model.yaml is merged only when the model section is asked for."""
    plain = load_project_config(config_dir / "config.yaml")
    with_model = load_project_config(config_dir / "config.yaml", sections=("model",))

    assert "model" not in plain.raw
    assert with_model.section("model")["order"] == 2


def test_inline_values_override_sibling_file(config_dir: Path) -> None:
    """Keys in config.yaml win over em.yaml."""
    (config_dir / "config.yaml").write_text("em:\n  max_iter: 99\n", encoding="utf-8")

    cfg = load_project_config(config_dir / "config.yaml", sections=("em",))

    assert cfg.section("em")["max_iter"] == 99
    assert cfg.section("em")["tol"] == pytest.approx(1e-8)


def test_unknown_section_and_non_mapping_section(tmp_path: Path) -> None:
    """Unknown section names and scalar sections fail fast."""
    cfg_path = tmp_path / "config.yaml"
    cfg_path.write_text("em: 3\n", encoding="utf-8")

    with pytest.raises(InvalidConfig, match="Unknown config sections requested"):
        load_project_config(cfg_path, sections=("bogus",))
    with pytest.raises(InvalidConfig, match="must be a mapping"):
        load_project_config(cfg_path).section("em")


def test_as_int_rejects_fractions_and_booleans() -> None:
    """Integer fields accept integral floats and strings only."""
    assert as_int({"n": "4"}, "n", 1, prefix="model") == 4
    assert as_int({"n": 4.0}, "n", 1, prefix="model") == 4
    with pytest.raises(InvalidConfig, match="model.n"):
        as_int({"n": 2.5}, "n", 1, prefix="model")
    with pytest.raises(InvalidConfig):
        as_int({"n": True}, "n", 1, prefix="model")
