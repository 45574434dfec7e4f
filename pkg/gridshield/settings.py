import logging
import os
from pathlib import Path

PACKAGE_ROOT = Path(__file__).parent
DATA_DIR = PACKAGE_ROOT / "data"
BUNDLED_PREFIX = "bundled:"
BUNDLED_MODEL_NAME = "ieee14_surrogate"

# Evaluation defaults
DEFAULT_ALPHA = 0.005
DEFAULT_P_H = 0.995
DEFAULT_N_BEST = 3
DEFAULT_RHO = 0.05
DEFAULT_MAX_SEEDS = 1000
DEFAULT_RANDOM_MAGNITUDE = 10.0
DEFAULT_STEP_SECONDS = 0.1

BENCH_STEPS = 50
BENCH_MIN_REPS = 5
BRUTE_FORCE_MAX_SENSORS = 15

# Numerical tolerances
SYMMETRY_TOL = 1e-10
RANK_RTOL = 1e-10
STEALTH_TOL = 1e-6
SPECTRAL_RADIUS_TOL = 1e-9

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
LOG_LEVEL = os.environ.get("GRIDSHIELD_LOG_LEVEL", "WARNING")


def configure_logging(level: str | int | None = None) -> None:
    """Install one stream handler on the package logger."""
    root = logging.getLogger("gridshield")
    root.setLevel(level or LOG_LEVEL)
    if not any(isinstance(h, logging.StreamHandler) for h in root.handlers):
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        root.addHandler(handler)
