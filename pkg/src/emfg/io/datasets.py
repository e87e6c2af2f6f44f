# ==================================================================================================
#                               Dataset, sidecar and report files
# ==================================================================================================
#
# On-disk formats of the CLI:
#
#   <name>.csv               header `k,y`, k = 1..N, y with 17 significant digits
#   <name>_sidecar.json      model parameters, theta_true and seed of a simulation
#   report / summary JSON    any payload, always tagged with "schema": 1
#   likelihood grid CSV      theta_1..theta_n,loglik
#
# JSON is written with sorted keys and a trailing newline so identical runs
# produce identical bytes. OSError surfaces as IoError; unparsable content as
# DatasetParseError naming the file and, for CSV rows, the line.

from __future__ import annotations

import json
import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from emfg.constants import DATASET_COLUMNS, FLOAT_FORMAT, SCHEMA_VERSION
from emfg.errors import DatasetParseError, InvalidConfig, IoError
from emfg.models.config import LinearModel
from emfg.models.state_space import Observations

LOGGER = logging.getLogger(__name__)

JSON_INDENT_SPACES: int = 2


# ==================================================================================================
#                                   JSON
# ==================================================================================================


def sidecar_path(dataset_path: Path) -> Path:
    """Sidecar JSON that sits next to a dataset CSV."""
    dataset_path = Path(dataset_path)
    return dataset_path.with_name(f"{dataset_path.stem}_sidecar.json")


def write_json(path: Path, payload: Mapping[str, Any]) -> Path:
    """Write `payload` plus the schema tag as sorted, indented JSON."""
    path = Path(path)
    document = {**dict(payload), "schema": SCHEMA_VERSION}
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(
            json.dumps(document, indent=JSON_INDENT_SPACES, sort_keys=True) + "\n",
            encoding="utf-8",
        )
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    return path


def read_json(path: Path) -> dict[str, Any]:
    """Read a JSON document written by `write_json` and check its schema tag."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DatasetParseError(f"{path}: line {exc.lineno}: invalid JSON: {exc.msg}") from exc
    if not isinstance(document, dict):
        raise DatasetParseError(f"{path}: top-level JSON value must be an object")
    if document.get("schema") != SCHEMA_VERSION:
        raise DatasetParseError(f"{path}: unsupported schema {document.get('schema')!r}, expected {SCHEMA_VERSION}")
    return document


# ==================================================================================================
#                                   SIDECAR
# ==================================================================================================


@dataclass(frozen=True, slots=True, eq=False)
class Sidecar:
    """What a simulated dataset was drawn from."""

    model: LinearModel
    theta_true: np.ndarray
    seed: int

    def to_dict(self) -> dict[str, Any]:
        """JSON-ready payload (schema tag added on write)."""
        return {
            "model": self.model.to_dict(),
            "theta_true": np.asarray(self.theta_true, dtype=float).tolist(),
            "seed": int(self.seed),
        }


def write_sidecar(dataset_path: Path, sidecar: Sidecar) -> Path:
    """Write the sidecar next to `dataset_path`."""
    return write_json(sidecar_path(dataset_path), sidecar.to_dict())


def read_sidecar(dataset_path: Path) -> Sidecar | None:
    """Sidecar of a dataset, or None when the dataset has none."""
    path = sidecar_path(dataset_path)
    if not path.exists():
        return None
    document = read_json(path)
    try:
        model = LinearModel.from_mapping(document["model"])
        theta_true = np.asarray(document["theta_true"], dtype=float)
        seed = int(document["seed"])
    except InvalidConfig as exc:
        raise DatasetParseError(f"{path}: invalid model description: {exc}") from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetParseError(f"{path}: malformed sidecar: {exc}") from exc
    return Sidecar(model=model, theta_true=theta_true, seed=seed)


# ==================================================================================================
#                                   DATASET CSV
# ==================================================================================================


def write_dataset(path: Path, observations: Observations) -> Path:
    """
    Write y_1..y_N as CSV `k,y`.

    Usage example
    -------------
        write_dataset(Path("data/fir.csv"), simulation.observations)
    """
    path = Path(path)
    k_col, y_col = DATASET_COLUMNS
    table = pd.DataFrame({k_col: np.arange(1, len(observations) + 1), y_col: observations.y})
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        table.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    LOGGER.info("Wrote %d observations to %s", len(observations), path)
    return path


def _first_bad_row(mask: np.ndarray) -> int | None:
    bad = np.flatnonzero(mask)
    return int(bad[0]) if bad.size else None


def read_dataset(path: Path) -> Observations:
    """
    Read a `k,y` CSV into Observations.

    Rows must be numbered 1, 2, ... in order and every y must be a finite number.

    Raises
    ------
    DatasetParseError
        On a bad header or malformed row, naming the file line.
    IoError
        If the file cannot be opened.
    """
    path = Path(path)
    k_col, y_col = DATASET_COLUMNS
    try:
        table = pd.read_csv(path, dtype=str, keep_default_na=False)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except pd.errors.EmptyDataError as exc:
        raise DatasetParseError(f"{path}: line 1: file is empty") from exc
    except pd.errors.ParserError as exc:
        raise DatasetParseError(f"{path}: {' '.join(str(exc).split())}") from exc

    if list(table.columns) != list(DATASET_COLUMNS):
        raise DatasetParseError(f"{path}: line 1: header must be {','.join(DATASET_COLUMNS)}, got {','.join(table.columns)}")
    if table.empty:
        raise DatasetParseError(f"{path}: line 2: dataset has no rows")

    k = pd.to_numeric(table[k_col].str.strip(), errors="coerce").to_numpy(dtype=float)
    y = pd.to_numeric(table[y_col].str.strip(), errors="coerce").to_numpy(dtype=float)
    expected_k = np.arange(1, len(table) + 1, dtype=float)

    # Header is line 1, so row i sits on line i + 2.
    bad_k = _first_bad_row(~(k == expected_k))
    if bad_k is not None:
        raise DatasetParseError(
            f"{path}: line {bad_k + 2}: expected k={bad_k + 1}, got {table[k_col].iloc[bad_k]!r}"
        )
    bad_y = _first_bad_row(~np.isfinite(y))
    if bad_y is not None:
        raise DatasetParseError(f"{path}: line {bad_y + 2}: y is not a finite number: {table[y_col].iloc[bad_y]!r}")

    LOGGER.info("Read %d observations from %s", y.size, path)
    return Observations(y)


# ==================================================================================================
#                                   LIKELIHOOD GRID
# ==================================================================================================


def write_likelihood_grid(path: Path, points: Sequence[np.ndarray], values: np.ndarray) -> Path:
    """Write grid points and log-likelihoods as CSV `theta_1..theta_n,loglik`."""
    path = Path(path)
    matrix = np.vstack([np.asarray(point, dtype=float).reshape(-1) for point in points])
    table = pd.DataFrame(matrix, columns=[f"theta_{i + 1}" for i in range(matrix.shape[1])])
    table["loglik"] = np.asarray(values, dtype=float)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        table.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    return path
