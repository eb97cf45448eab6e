"""
Centralized configuration loader.
Reads .env for runtime overrides only (seed, workers, log level, chunking).
Experiment definitions come from JSON config files; numerical tolerances live here.
"""

from __future__ import annotations

import os
from dotenv import load_dotenv

load_dotenv()


def _optional_int(name: str) -> int | None:
    raw = os.getenv(name, "").strip()
    return int(raw) if raw else None


def _int_setting(name: str, default: int) -> int:
    # malformed values fall back here; main() reports them via invalid_settings()
    try:
        value = _optional_int(name)
    except ValueError:
        return default
    return default if value is None else value


# --- Runtime overrides (from .env / environment) ---
RUIN_WORKERS = _int_setting("RUIN_WORKERS", 0) or os.cpu_count() or 1
RUIN_LOG_LEVEL = os.getenv("RUIN_LOG_LEVEL", "INFO").upper()
RUIN_CHUNK_REPS = _int_setting("RUIN_CHUNK_REPS", 512)

INTEGER_SETTINGS = ("RUIN_SEED", "RUIN_WORKERS", "RUIN_CHUNK_REPS")


def invalid_settings() -> list[str]:
    """Integer environment settings whose current value does not parse."""
    bad = []
    for name in INTEGER_SETTINGS:
        try:
            _optional_int(name)
        except ValueError:
            bad.append(name)
    return bad


def seed_override() -> int | None:
    """RUIN_SEED as currently set in the environment (None when unset)."""
    return _optional_int("RUIN_SEED")


LIBRARY_VERSION = "0.3.0"

# --- Quadrature ---
QUAD_EPSABS_2D = 1e-9
QUAD_EPSREL_2D = 1e-9
QUAD_EPSABS_1D = 1e-12
QUAD_EPSREL_1D = 1e-10
QUAD_LIMIT = 200
# an error estimate above this (absolute, or relative to the value) is a failure
QUAD_FAILURE_TOL = 1e-6

# --- Gaussian sampling ---
JITTER_LADDER = (0.0, 1e-12, 1e-10, 1e-8)
MAX_GRID_NODES = 8192

# --- Series ---
SERIES_TOL = 1e-15
SERIES_MAX_TERMS = 2000
EXAMPLE2_MAX_T = 3.0
EXAMPLE2_TAIL_TOL = 1e-12

# --- Monte Carlo ---
MIN_REPS = 100
MIN_GRID_N = 64
ESS_WARN_FRACTION = 0.01
MIN_CONDITIONAL_ESS = 200
CI_Z = 1.959963984540054

# --- Default experiment fields (merged under every loaded config) ---
DEFAULT_EXPERIMENT = {
    "estimator": "importance",
    "grid_n": 512,
    "reps": 10_000,
    "seed": 20170601,
    "x_grid": [0.0, 0.025, 0.05, 0.075, 0.1, 0.15, 0.2, 0.3, 0.4, 0.5],
    "alphas": [1.0, 2.0],
    "t_values": [0.0, 1.0, 2.0],
    "q_values": [0.0, 5.0, 50.0],
    "t_grid": [0.25, 0.5, 0.75, 1.0, 1.5, 2.0],
    "chunk_reps": RUIN_CHUNK_REPS,
}
