"""
Declarative experiment description loaded from a single JSON object.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

from config import DEFAULT_EXPERIMENT, MAX_GRID_NODES, MIN_GRID_N, MIN_REPS
from errors import ConfigError, DomainError
from process.discount import DiscountSpec
from process.kernels import CovKernel
from simulation.window import WindowRule

logger = logging.getLogger(__name__)

REQUIRED_FIELDS = ("kernel", "discount", "c", "s_horizon", "window", "u_values", "output")


class Estimator(str, Enum):
    CRUDE = "crude"
    IMPORTANCE = "importance"


@dataclass(frozen=True)
class ExperimentConfig:
    kernel: CovKernel
    discount: DiscountSpec
    c: float
    s_horizon: float
    window: WindowRule
    u_values: tuple[float, ...]
    grid_n: int
    reps: int
    estimator: Estimator
    seed: int
    output: str
    x_grid: tuple[float, ...] = ()
    alphas: tuple[float, ...] = ()
    t_values: tuple[float, ...] = ()
    q_values: tuple[float, ...] = ()
    t_grid: tuple[float, ...] = ()
    chunk_reps: int = 512

    def __post_init__(self):
        if not self.c > 0:
            raise ConfigError(f"c must be > 0, got {self.c}")
        if not self.s_horizon > 0:
            raise ConfigError(f"s_horizon must be > 0, got {self.s_horizon}")
        if not self.u_values:
            raise ConfigError("u_values must not be empty")
        if any(not u > 0 for u in self.u_values):
            raise ConfigError(f"u_values must be positive, got {list(self.u_values)}")
        if any(b <= a for a, b in zip(self.u_values, self.u_values[1:])):
            raise ConfigError(f"u_values must be increasing, got {list(self.u_values)}")
        if not MIN_GRID_N <= self.grid_n <= MAX_GRID_NODES:
            raise ConfigError(f"grid_n must be in [{MIN_GRID_N}, {MAX_GRID_NODES}], got {self.grid_n}")
        if self.reps < MIN_REPS:
            raise ConfigError(f"reps must be >= {MIN_REPS}, got {self.reps}")
        if self.chunk_reps < 1:
            raise ConfigError(f"chunk_reps must be >= 1, got {self.chunk_reps}")
        if any(b <= a for a, b in zip(self.x_grid, self.x_grid[1:])) or any(x < 0 for x in self.x_grid):
            raise ConfigError("x_grid must be nonnegative and increasing")
        if any(not 0 < a <= 2 for a in self.alphas):
            raise ConfigError(f"alphas must lie in (0, 2], got {list(self.alphas)}")
        if any(t < 0 for t in self.t_values) or any(q < 0 for q in self.q_values):
            raise ConfigError("t_values and q_values must be >= 0")
        if any(not t > 0 for t in self.t_grid):
            raise ConfigError("t_grid values must be > 0")

    # ─── Loading ────────────────────────────────────────────

    @classmethod
    def from_dict(cls, raw: dict) -> ExperimentConfig:
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        missing = [key for key in REQUIRED_FIELDS if key not in raw]
        if missing:
            raise ConfigError(f"config is missing required fields: {missing}")
        unknown = set(raw) - set(REQUIRED_FIELDS) - set(DEFAULT_EXPERIMENT)
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")

        merged = {**DEFAULT_EXPERIMENT, **raw}
        try:
            return cls(
                kernel=CovKernel.from_dict(merged["kernel"]),
                discount=DiscountSpec.from_dict(merged["discount"]),
                c=_real(merged, "c"),
                s_horizon=_real(merged, "s_horizon"),
                window=WindowRule.from_dict(merged["window"]),
                u_values=_reals(merged, "u_values"),
                grid_n=_integer(merged, "grid_n"),
                reps=_integer(merged, "reps"),
                estimator=Estimator(str(merged["estimator"]).lower()),
                seed=_integer(merged, "seed"),
                output=str(merged["output"]),
                x_grid=_reals(merged, "x_grid"),
                alphas=_reals(merged, "alphas"),
                t_values=_reals(merged, "t_values"),
                q_values=_reals(merged, "q_values"),
                t_grid=_reals(merged, "t_grid"),
                chunk_reps=_integer(merged, "chunk_reps"),
            )
        except (DomainError, ValueError, TypeError) as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(f"invalid config: {e}") from e

    @classmethod
    def load(cls, path: str | Path) -> ExperimentConfig:
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file {path} is not valid JSON: {e}") from e
        config = cls.from_dict(raw)
        logger.debug("Loaded config %s (hash %s)", path, config.config_hash()[:12])
        return config

    def to_dict(self) -> dict:
        return {
            "kernel": self.kernel.to_dict(),
            "discount": self.discount.to_dict(),
            "c": self.c,
            "s_horizon": self.s_horizon,
            "window": self.window.to_dict(),
            "u_values": list(self.u_values),
            "grid_n": self.grid_n,
            "reps": self.reps,
            "estimator": self.estimator.value,
            "seed": self.seed,
            "output": self.output,
            "x_grid": list(self.x_grid),
            "alphas": list(self.alphas),
            "t_values": list(self.t_values),
            "q_values": list(self.q_values),
            "t_grid": list(self.t_grid),
            "chunk_reps": self.chunk_reps,
        }

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def with_overrides(self, **changes) -> ExperimentConfig:
        changes = {k: v for k, v in changes.items() if v is not None}
        return replace(self, **changes) if changes else self

    # ─── Derived quantities ─────────────────────────────────

    def t_window(self, u: float) -> float:
        return self.window.t_window(u)

    @property
    def max_window(self) -> float:
        return max(self.window.t_window(u) for u in self.u_values)


def _real(raw: dict, key: str) -> float:
    value = raw[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key} must be a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(f"{key} must be finite")
    return value


def _reals(raw: dict, key: str) -> tuple[float, ...]:
    values = raw[key]
    if not isinstance(values, list):
        raise ConfigError(f"{key} must be a list of numbers, got {values!r}")
    return tuple(_real({key: v}, key) for v in values)


def _integer(raw: dict, key: str) -> int:
    value = raw[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{key} must be an integer, got {value!r}")
    return value
