"""
Exact Gaussian sampling on a uniform grid.

Paths are L·ξ with L the lower Cholesky factor of the grid covariance and ξ a
standard normal vector drawn from a counter-based stream. Nodes with zero
variance (e.g. fBm at t=0) are pinned to 0 and excluded from the factorization.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, special

from config import JITTER_LADDER, MAX_GRID_NODES
from errors import DomainError, FactorizationError
from process.kernels import CovKernel, cov_matrix

logger = logging.getLogger(__name__)

_MASK64 = (1 << 64) - 1
_TWO_POW_M53 = 2.0**-53


# ─── Grid ───────────────────────────────────────────────────

@dataclass(frozen=True)
class Grid:
    """Uniform grid t_i = t_start + i·Δ, i = 0..n−1."""

    t_start: float
    t_end: float
    n: int

    def __post_init__(self):
        if self.n < 2:
            raise DomainError(f"grid needs n >= 2 nodes, got {self.n}")
        if not (self.t_start >= 0 and self.t_end > self.t_start):
            raise DomainError(f"grid needs 0 <= t_start < t_end, got [{self.t_start}, {self.t_end}]")

    @classmethod
    def for_kernel(cls, kernel: CovKernel, t_end: float, n: int) -> Grid:
        """
        n nodes covering [0, t_end]. Kernels undefined at 0 start at the first
        positive node of the uniform grid instead, keeping spacing t_end/n.
        """
        if kernel.requires_positive_time:
            return cls(t_end / n, t_end, n)
        return cls(0.0, t_end, n)

    @property
    def spacing(self) -> float:
        return (self.t_end - self.t_start) / (self.n - 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.t_start, self.t_end, self.n)

    def check_kernel(self, kernel: CovKernel) -> None:
        if kernel.requires_positive_time and self.t_start <= 0:
            raise DomainError(f"{kernel.label} grids must start at a positive time")

    def describe(self) -> str:
        return f"grid[{self.t_start:g}, {self.t_end:g}] n={self.n}"


# ─── Random streams ─────────────────────────────────────────

@dataclass
class RngStream:
    """
    Counter-based Gaussian stream keyed by (seed, stream_id).

    Uniforms come from the Philox-4x64 generator keyed with
    (seed << 64) | stream_id: each raw 64-bit word x maps to
    u = ((x >> 11) + 0.5)·2⁻⁵³ ∈ (0,1), and the Gaussian is Φ⁻¹(u). The
    sequence therefore depends only on (seed, stream_id) and the draw count.
    """

    seed: int
    stream_id: int = 0
    _bitgen: np.random.Philox | None = field(default=None, init=False, repr=False, compare=False)

    def _generator(self) -> np.random.Philox:
        if self._bitgen is None:
            key = ((int(self.seed) & _MASK64) << 64) | (int(self.stream_id) & _MASK64)
            self._bitgen = np.random.Philox(key=key)
        return self._bitgen

    def uniform(self, size: int) -> np.ndarray:
        raw = self._generator().random_raw(size)
        return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO_POW_M53

    def standard_normal(self, size: int) -> np.ndarray:
        return special.ndtri(self.uniform(size))

    def substream(self, index: int) -> RngStream:
        """Fresh stream for replication `index` under the same seed."""
        return RngStream(self.seed, (int(self.stream_id) << 32) + int(index))


# ─── Factorization ──────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class FactorizedKernel:
    """Lower factor L with L·Lᵀ = Σ + jitter·I on the non-degenerate nodes."""

    times: np.ndarray
    lower: np.ndarray
    jitter_used: float
    label: str = ""
    active: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.times.size

    @property
    def active_mask(self) -> np.ndarray:
        return np.ones(self.n, dtype=bool) if self.active is None else self.active

    def covariance(self) -> np.ndarray:
        return self.lower @ self.lower.T

    def transform(self, xi: np.ndarray) -> np.ndarray:
        """Map standard normal vector(s) ξ (shape (n,) or (reps, n)) to paths L·ξ."""
        xi = np.asarray(xi, dtype=float)
        if xi.shape[-1] != self.n:
            raise DomainError(f"expected {self.n} normals per path, got {xi.shape[-1]}")
        return xi @ self.lower.T

    def whiten(self, mean: np.ndarray) -> np.ndarray:
        """v = L⁻¹·mean on the active nodes (triangular solve, no inversion)."""
        mean = np.asarray(mean, dtype=float)
        if mean.shape != (self.n,):
            raise DomainError(f"mean must have one entry per grid node ({self.n}), got {mean.shape}")
        active = self.active_mask
        if np.any(mean[~active] != 0):
            raise DomainError("mean must vanish on zero-variance nodes")
        v = np.zeros(self.n)
        sub = self.lower[np.ix_(active, active)]
        v[active] = linalg.solve_triangular(sub, mean[active], lower=True, check_finite=False)
        return v


def factorize_matrix(sigma: np.ndarray, times, label: str = "") -> FactorizedKernel:
    """Cholesky factor of a covariance matrix with the jitter escalation ladder."""
    sigma = np.asarray(sigma, dtype=float)
    times = np.asarray(times, dtype=float)
    n = times.size
    if sigma.shape != (n, n):
        raise DomainError(f"covariance shape {sigma.shape} does not match {n} nodes")
    if n > MAX_GRID_NODES:
        raise DomainError(f"grid has {n} nodes; the dense factorization limit is {MAX_GRID_NODES}")

    diag = np.diag(sigma)
    active = diag > 0
    sub = sigma[np.ix_(active, active)]
    scale = float(diag.max()) if diag.size else 0.0

    for rung in JITTER_LADDER:
        jitter = rung * scale
        try:
            sub_lower = linalg.cholesky(
                sub + jitter * np.eye(sub.shape[0]), lower=True, check_finite=False
            )
        except linalg.LinAlgError:
            logger.debug("Cholesky failed at jitter %.1e for %s", jitter, label)
            continue
        if not np.all(np.isfinite(sub_lower)):
            continue

        lower = np.zeros((n, n))
        lower[np.ix_(active, active)] = sub_lower
        if jitter > 0:
            logger.warning("Factorized %s with jitter %.3e (rung %.0e)", label, jitter, rung)
        else:
            logger.debug("Factorized %s without jitter", label)
        return FactorizedKernel(
            times=times, lower=lower, jitter_used=jitter, label=label,
            active=None if active.all() else active,
        )

    raise FactorizationError(
        f"covariance of {label or 'matrix'} is not positive definite "
        f"after jitter {JITTER_LADDER[-1]:.0e}·maxdiag"
    )


def factorize(kernel: CovKernel, grid: Grid) -> FactorizedKernel:
    grid.check_kernel(kernel)
    if grid.n > MAX_GRID_NODES:
        raise DomainError(f"grid has {grid.n} nodes; the dense factorization limit is {MAX_GRID_NODES}")
    nodes = grid.nodes
    return factorize_matrix(cov_matrix(kernel, nodes), nodes, label=f"{kernel.label} on {grid.describe()}")


# ─── Sampling ───────────────────────────────────────────────

def sample_path(fk: FactorizedKernel, rng: RngStream) -> np.ndarray:
    """One exact draw of Z on the grid."""
    return fk.transform(rng.standard_normal(fk.n))


def sample_path_shifted(fk: FactorizedKernel, rng: RngStream, mean) -> tuple[np.ndarray, float]:
    """
    W ~ N(mean, Σ) and log[dN(0,Σ)/dN(mean,Σ)](W).

    With v = L⁻¹·mean and W = L(ξ + v): mᵀΣ⁻¹W = vᵀ(ξ + v), so the ratio is
    −vᵀξ − ½vᵀv.
    """
    v = fk.whiten(mean)
    xi = rng.standard_normal(fk.n)
    path = fk.transform(xi + v)
    log_ratio = -float(v @ xi) - 0.5 * float(v @ v)
    return path, log_ratio


# ─── Conditional law ────────────────────────────────────────

def conditional_gaussian(var_z: float, q, b, x: float, y: float) -> tuple[float, float]:
    """
    Law of Z given (X, Y) = (x, y) for a centered Gaussian triple with
    Var Z = var_z, Cov((X,Y)) = q and Cov(Z, (X,Y)) = b.
    """
    q = np.asarray(q, dtype=float)
    b = np.asarray(b, dtype=float)
    if q.shape != (2, 2) or b.shape != (2,):
        raise DomainError("conditional_gaussian needs a 2x2 q and a 2-vector b")
    if not np.allclose(q, q.T):
        raise DomainError("q must be symmetric")
    try:
        factor = linalg.cho_factor(q, lower=True, check_finite=False)
    except linalg.LinAlgError:
        raise DomainError("q is singular or not positive definite") from None

    weights = linalg.cho_solve(factor, b, check_finite=False)
    mean = float(np.array([x, y]) @ weights)
    variance = float(var_z - b @ weights)
    return mean, max(variance, 0.0)
