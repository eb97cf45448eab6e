"""
Covariance kernels R(s,t) = Cov(Z(s), Z(t)) of the loss-rate process.

The family is closed: fractional Brownian motion, Brownian motion,
Ornstein-Uhlenbeck, Slepian and scaled Brownian motion B(t)/sqrt(t).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from errors import DomainError

logger = logging.getLogger(__name__)


class KernelFamily(str, Enum):
    FBM = "fbm"
    BM = "bm"
    OU = "ou"
    SLEPIAN = "slepian"
    SCALED_BM = "scaled_bm"


@dataclass(frozen=True)
class CovKernel:
    """Immutable covariance kernel. `hurst` is used by FBM, `theta` by OU."""

    family: KernelFamily
    hurst: float | None = None
    theta: float | None = None
    description: str = ""

    def __post_init__(self):
        if self.family is KernelFamily.FBM:
            if self.hurst is None or not 0.0 < self.hurst < 1.0:
                raise DomainError(f"FBM kernel needs a Hurst index in (0,1), got {self.hurst!r}")
        if self.family is KernelFamily.OU:
            if self.theta is None:
                object.__setattr__(self, "theta", 1.0)
            elif not self.theta > 0.0:
                raise DomainError(f"OU kernel needs theta > 0, got {self.theta!r}")
        if not self.description:
            object.__setattr__(self, "description", self.label)

    @property
    def label(self) -> str:
        if self.family is KernelFamily.FBM:
            return f"fbm(H={self.hurst:g})"
        if self.family is KernelFamily.OU:
            return f"ou(theta={self.theta:g})"
        return self.family.value

    @property
    def requires_positive_time(self) -> bool:
        return self.family is KernelFamily.SCALED_BM

    # ─── Construction ───────────────────────────────────────

    @classmethod
    def fbm(cls, hurst: float) -> CovKernel:
        return cls(KernelFamily.FBM, hurst=hurst)

    @classmethod
    def bm(cls) -> CovKernel:
        return cls(KernelFamily.BM)

    @classmethod
    def ou(cls, theta: float = 1.0) -> CovKernel:
        return cls(KernelFamily.OU, theta=theta)

    @classmethod
    def slepian(cls) -> CovKernel:
        return cls(KernelFamily.SLEPIAN)

    @classmethod
    def scaled_bm(cls) -> CovKernel:
        return cls(KernelFamily.SCALED_BM)

    @classmethod
    def from_dict(cls, spec: dict) -> CovKernel:
        """Build from a config object {"family": ..., "hurst": ..., "theta": ...}."""
        if not isinstance(spec, dict) or "family" not in spec:
            raise DomainError(f"kernel spec must be an object with a 'family' key, got {spec!r}")
        unknown = set(spec) - {"family", "hurst", "theta", "description"}
        if unknown:
            raise DomainError(f"unknown kernel fields: {sorted(unknown)}")
        try:
            family = KernelFamily(str(spec["family"]).lower())
        except ValueError:
            raise DomainError(f"unknown kernel family {spec['family']!r}") from None
        return cls(
            family,
            hurst=_opt_float(spec.get("hurst")),
            theta=_opt_float(spec.get("theta")),
            description=str(spec.get("description", "")),
        )

    def to_dict(self) -> dict:
        out = {"family": self.family.value}
        if self.hurst is not None:
            out["hurst"] = self.hurst
        if self.theta is not None:
            out["theta"] = self.theta
        return out


def _opt_float(value) -> float | None:
    return None if value is None else float(value)


def cov(kernel: CovKernel, s, t):
    """
    Evaluate R(s,t). Accepts scalars or broadcastable arrays and returns the same shape.

    Raises DomainError for negative times, and for SCALED_BM at time 0.
    """
    s_arr = np.asarray(s, dtype=float)
    t_arr = np.asarray(t, dtype=float)
    if np.any(s_arr < 0) or np.any(t_arr < 0):
        raise DomainError(f"covariance arguments must be >= 0 ({kernel.label})")

    family = kernel.family
    if family is KernelFamily.FBM:
        two_h = 2.0 * kernel.hurst
        out = 0.5 * (t_arr**two_h + s_arr**two_h - np.abs(t_arr - s_arr) ** two_h)
    elif family is KernelFamily.BM:
        out = np.minimum(s_arr, t_arr)
    elif family is KernelFamily.OU:
        out = np.exp(-kernel.theta * np.abs(t_arr - s_arr))
    elif family is KernelFamily.SLEPIAN:
        out = np.maximum(0.0, 1.0 - np.abs(t_arr - s_arr))
    elif family is KernelFamily.SCALED_BM:
        if np.any(s_arr == 0) or np.any(t_arr == 0):
            raise DomainError("scaled_bm covariance is undefined at t=0")
        out = np.minimum(s_arr, t_arr) / np.sqrt(s_arr * t_arr)
    else:  # pragma: no cover
        raise DomainError(f"unsupported kernel family {family!r}")

    if out.ndim == 0:
        return float(out)
    return out


def cov_matrix(kernel: CovKernel, times) -> np.ndarray:
    """Dense covariance matrix Σ_ij = R(t_i, t_j), symmetrized exactly."""
    t = np.asarray(times, dtype=float)
    sigma = cov(kernel, t[:, None], t[None, :])
    return 0.5 * (sigma + sigma.T)


def check_a1(kernel: CovKernel, grid) -> dict:
    """
    Check assumption A1 (non-degenerate, nonnegative covariance) on all grid pairs.

    Returns a report dict with min_cov, min_var and pass.
    """
    times = np.asarray(getattr(grid, "nodes", grid), dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise DomainError("A1 check needs a non-empty 1-d grid")
    if np.any(np.diff(times) <= 0):
        raise DomainError("A1 check needs a strictly increasing grid")

    sigma = cov_matrix(kernel, times)
    min_cov = float(sigma.min())
    min_var = float(np.diag(sigma).min())
    passed = min_cov >= 0.0 and min_var > 0.0
    if not passed:
        logger.warning(
            "A1 check failed for %s: min_cov=%.3g, min_var=%.3g", kernel.label, min_cov, min_var
        )
    return {"min_cov": min_cov, "min_var": min_var, "pass": passed}
