# ==================================================================================================
#                               Config loading
# ==================================================================================================
#
# Single entry point for reading project configuration from disk.
#
# A project config is one YAML mapping (`config/config.yaml`) plus optional
# sibling files holding one section each (`model.yaml`, `em.yaml`,
# `oracle.yaml`). Commands request only the sections they consume; inline
# values in the main file override the sibling file.
#
# This module performs no numerical logic and does not interpret values. Typed
# views (`LinearModel`, `EmConfig`, `QuadratureGrid`, ...) are built from the
# raw mappings by the `from_mapping` constructors next to the code that uses
# them.

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping, Sequence

import yaml

from emfg.errors import InvalidConfig

SECTION_FILE_NAMES: dict[str, str] = {
    "model": "model.yaml",
    "em": "em.yaml",
    "oracle": "oracle.yaml",
}


# ==================================================================================================
#                                   TYPES
# ==================================================================================================

@dataclass(frozen=True, slots=True)
class ProjectConfig:
    """
    Parsed project configuration.

    Parameters
    ----------
    raw
        Raw config dictionary loaded from YAML.

    Usage example
    -------------
        cfg = load_project_config(Path("config/config.yaml"), sections=("em",))
        max_iter = cfg.section("em").get("max_iter", 50)
    """

    raw: Dict[str, Any] = field(default_factory=dict)

    def section(self, name: str) -> Mapping[str, Any]:
        """Return one top-level section as a mapping (empty when absent)."""
        value = self.raw.get(name, {})
        if value is None:
            return {}
        if not isinstance(value, Mapping):
            raise InvalidConfig(f"Config section '{name}' must be a mapping, got {type(value).__name__}.")
        return value


# ==================================================================================================
#                                   IO
# ==================================================================================================

def _read_yaml(path: Path) -> Dict[str, Any]:
    """Parse one YAML file; an empty file is an empty mapping."""
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise InvalidConfig(f"Config file {path} is not valid YAML: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, Mapping):
        raise InvalidConfig(f"Config must be a mapping at top-level, got: {type(data).__name__} in {path}")
    return dict(data)


def _check_sections(sections: Sequence[str]) -> tuple[str, ...]:
    requested = tuple(dict.fromkeys(str(section) for section in sections))
    unknown = [section for section in requested if section not in SECTION_FILE_NAMES]
    if unknown:
        raise InvalidConfig(f"Unknown config sections requested: {', '.join(sorted(unknown))}")
    return requested


def _section_mapping(value: Any, *, name: str, source: Path) -> Dict[str, Any]:
    if value is None:
        return {}
    if not isinstance(value, Mapping):
        raise InvalidConfig(f"Config section '{name}' in {source} must be a mapping.")
    return dict(value)


def load_raw_project_config(config_path: Path, *, sections: Sequence[str] = ()) -> Dict[str, Any]:
    """
    The main YAML mapping with the requested sibling sections merged in.

    For each section the sibling file (`em.yaml` for `em`, ...) is read when it
    exists next to `config_path`; keys written inline in the main file win.
    """
    config_path = Path(config_path)
    if not config_path.exists():
        raise InvalidConfig(f"Config file not found: {config_path}")
    raw = _read_yaml(config_path)
    for name in _check_sections(sections):
        inline = _section_mapping(raw.get(name), name=name, source=config_path)
        sibling_path = config_path.with_name(SECTION_FILE_NAMES[name])
        sibling: Dict[str, Any] = {}
        if sibling_path.exists():
            sibling = _section_mapping(_read_yaml(sibling_path).get(name), name=name, source=sibling_path)
        raw[name] = {**sibling, **inline}
    return raw


def load_project_config(config_path: Path | None, *, sections: Sequence[str] = ()) -> ProjectConfig:
    """
    Load the project config for one command.

    Parameters
    ----------
    config_path
        Main YAML file, or None for an empty config (every default applies).
    sections
        Sibling sections the command reads.

    Usage example
    -------------
        cfg = load_project_config(Path("config/config.yaml"), sections=("model", "em"))
        cfg.section("model").get("order")
    """
    if config_path is None:
        _check_sections(sections)
        return ProjectConfig(raw={})
    return ProjectConfig(raw=load_raw_project_config(Path(config_path), sections=sections))


# ==================================================================================================
#                                   FIELD READERS
# ==================================================================================================
#
# Shared by every `from_mapping` constructor so conversion failures surface as
# InvalidConfig naming the offending field.

def require_mapping(value: Any, *, name: str) -> Mapping[str, Any]:
    """Require a mapping-like config section."""
    if value is None:
        return {}
    if not isinstance(value, Mapping):
        raise InvalidConfig(f"Expected mapping for {name}, got {type(value).__name__}")
    return value


def as_float(mapping: Mapping[str, Any], key: str, default: float, *, prefix: str) -> float:
    """Read a float config field with a default."""
    try:
        return float(mapping.get(key, default))
    except (TypeError, ValueError) as exc:
        raise InvalidConfig(f"{prefix}.{key} must be a number, got {mapping.get(key)!r}") from exc


def as_int(mapping: Mapping[str, Any], key: str, default: int, *, prefix: str) -> int:
    """Read an integer config field with a default."""
    value = mapping.get(key, default)
    if isinstance(value, bool):
        raise InvalidConfig(f"{prefix}.{key} must be an integer, got {value!r}")
    try:
        as_number = float(value)
    except (TypeError, ValueError) as exc:
        raise InvalidConfig(f"{prefix}.{key} must be an integer, got {value!r}") from exc
    if not as_number.is_integer():
        raise InvalidConfig(f"{prefix}.{key} must be an integer, got {value!r}")
    return int(as_number)
