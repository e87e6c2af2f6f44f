"""Shared pytest fixtures for the emfg test suite.

Random instances are drawn from seeded generators so every test is
deterministic; `random_spd` builds well-conditioned covariance matrices.
"""

from collections.abc import Callable
from pathlib import Path
import sys

import numpy as np
import pytest

# Ensure `import emfg` resolves to the in-repo source tree during tests.
PROJECT_ROOT = Path(__file__).resolve().parents[1]
SRC_ROOT = PROJECT_ROOT / "src"
if str(SRC_ROOT) not in sys.path:
    sys.path.insert(0, str(SRC_ROOT))

from emfg.checks.tables import random_spd as _random_spd  # noqa: E402
from emfg.constants import SEED_ENV_VAR  # noqa: E402


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator; each test gets a fresh stream."""
    return np.random.default_rng(20240611)


@pytest.fixture
def random_spd(rng: np.random.Generator) -> Callable[[int], np.ndarray]:
    """Factory for symmetric positive definite matrices of a given size."""

    def _make(dim: int) -> np.ndarray:
        return _random_spd(rng, dim)

    return _make


@pytest.fixture
def config_dir(tmp_path: Path) -> Path:
    """Project config with small sibling sections for CLI and loader tests."""
    (tmp_path / "config.yaml").write_text(
        "logging:\n  level: WARNING\nseed: 11\n",
        encoding="utf-8",
    )
    (tmp_path / "model.yaml").write_text(
        "model:\n  kind: fir\n  order: 2\n  length: 40\n  sigma_u2: 1.0\n  sigma_z2: 0.1\n",
        encoding="utf-8",
    )
    (tmp_path / "em.yaml").write_text("em:\n  max_iter: 5\n  tol: 1.0e-8\n", encoding="utf-8")
    (tmp_path / "oracle.yaml").write_text("oracle:\n  instances: 2\n", encoding="utf-8")
    return tmp_path


@pytest.fixture(autouse=True)
def _clear_seed_env(monkeypatch: pytest.MonkeyPatch) -> None:
    """Tests never inherit a seed from the calling shell."""
    monkeypatch.delenv(SEED_ENV_VAR, raising=False)
