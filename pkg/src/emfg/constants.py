# ==================================================================================================
#                                   Constants
# ==================================================================================================
#
# Numeric defaults and on-disk format markers shared by the library and the CLI.

from typing import Final

# Symmetry tolerance for covariance / weight matrices.
DEFAULT_TAU_SYM: Final[float] = 1e-10
# Eigenvalue floor used by psd_project and the PSD checks.
DEFAULT_TAU_PSD: Final[float] = 0.0
# Relative eigenvalue threshold (w.r.t. the largest eigenvalue) below which a solve fails.
DEFAULT_TAU_SOLVE: Final[float] = 1e-12

# Version tag written into every JSON sidecar and report.
SCHEMA_VERSION: Final[int] = 1

# Dataset CSV layout.
DATASET_COLUMNS: Final[tuple[str, str]] = ("k", "y")
# 17 significant digits round-trip every IEEE double.
FLOAT_FORMAT: Final[str] = "%.17g"

# Environment variable that supplies the seed when --seed is absent.
SEED_ENV_VAR: Final[str] = "EMFG_SEED"

# Allowed slack on log-likelihood decreases between batch EM iterates.
MONOTONICITY_SLACK: Final[float] = 1e-9

# Smallest sample size accepted by the Monte Carlo trace check.
MIN_MC_SAMPLES: Final[int] = 10_000
