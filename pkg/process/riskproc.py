"""
Discounted reserve paths R_u(t) = u + c·δ̃(t) − ∫₀ᵗ e^{−δ(s)} Z(s) ds on a grid,
and detection of classical ruin, Parisian ruin and the Parisian ruin time.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from errors import DomainError
from process.discount import DiscountSpec, delta_tilde_nodes
from process.gauss_sim import Grid

logger = logging.getLogger(__name__)

# relative slack when comparing horizons with float grid ends
_HORIZON_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class RiskPath:
    grid: Grid
    z: np.ndarray
    discounted_premium: np.ndarray
    y: np.ndarray
    r: np.ndarray
    u: float
    c: float


@dataclass(frozen=True)
class ParisianVerdict:
    classical_ruin: bool
    parisian_ruin: bool
    tau: float | None = None
    first_hit: float | None = None


NO_RUIN = ParisianVerdict(False, False, None, None)


class RiskPathBuilder:
    """
    Precomputes the discount factors and premium on a grid so that batches of
    Z paths can be turned into reserve paths with one cumulative integration.
    """

    def __init__(self, grid: Grid, discount: DiscountSpec, c: float):
        if c < 0:
            raise DomainError(f"premium rate c must be >= 0, got {c}")
        self.grid = grid
        self.discount = discount
        self.c = float(c)
        self.times = grid.nodes
        self.factor = np.asarray(discount.factor(self.times), dtype=float)
        self.premium = self.c * delta_tilde_nodes(discount, self.times)

    def integrated_loss(self, z: np.ndarray) -> np.ndarray:
        """Y at each node: trapezoid rule on the grid, rectangle rule on [0, t_start]."""
        z = np.asarray(z, dtype=float)
        if z.shape[-1] != self.times.size:
            raise DomainError(f"path has {z.shape[-1]} values for {self.times.size} grid nodes")
        integrand = self.factor * z
        y = integrate.cumulative_trapezoid(integrand, self.times, axis=-1, initial=0.0)
        if self.grid.t_start > 0:
            y = y + (integrand[..., :1] * self.grid.t_start)
        return y

    def reserve(self, z: np.ndarray, u: float) -> np.ndarray:
        return u + self.premium - self.integrated_loss(z)

    def trapezoid_weights(self, s_horizon: float) -> np.ndarray:
        """
        Weights a with aᵀz equal to the discretized Y at the last node ≤ s_horizon.
        Nodes beyond the horizon get weight 0.
        """
        times = self.times
        k = last_node_within(times, s_horizon)
        w = np.zeros(times.size)
        if k > 0:
            dt = np.diff(times[: k + 1])
            w[:k] += 0.5 * dt
            w[1 : k + 1] += 0.5 * dt
        if self.grid.t_start > 0:
            w[0] += self.grid.t_start
        return w * self.factor


def build_risk_path(z, grid: Grid, discount: DiscountSpec, u: float, c: float) -> RiskPath:
    if u < 0:
        raise DomainError(f"initial reserve u must be >= 0, got {u}")
    z = np.asarray(z, dtype=float)
    if z.ndim != 1 or z.size != grid.n:
        raise DomainError(f"path length {z.size} does not match grid with {grid.n} nodes")
    builder = RiskPathBuilder(grid, discount, c)
    y = builder.integrated_loss(z)
    r = u + builder.premium - y
    return RiskPath(grid=grid, z=z, discounted_premium=builder.premium, y=y, r=r, u=float(u), c=float(c))


# ─── Excursions ─────────────────────────────────────────────

def last_node_within(times: np.ndarray, horizon: float) -> int:
    """Index of the last node with time ≤ horizon (−1 if none)."""
    slack = _HORIZON_SLACK * max(1.0, abs(horizon))
    return int(np.searchsorted(times, horizon + slack, side="right")) - 1


def check_horizon(times: np.ndarray, s_horizon: float, t_window: float) -> None:
    if t_window < 0:
        raise DomainError(f"window must be >= 0, got {t_window}")
    if s_horizon < times[0]:
        raise DomainError(f"horizon {s_horizon} starts before the grid ({times[0]})")
    need = s_horizon + t_window
    if need > times[-1] * (1 + _HORIZON_SLACK) + _HORIZON_SLACK:
        raise DomainError(f"horizon S+T_u={need:g} exceeds the grid end {times[-1]:g}")


def excursions_below_zero(times: np.ndarray, r: np.ndarray):
    """
    Maximal runs of nodes with r < 0 (ties r = 0 count as not ruined).

    Returns (first_node, start, end): index of each run's first negative node,
    and the entry/exit times located by linear interpolation. A run touching
    the grid end is censored at the last node.
    """
    neg = r < 0
    if not neg.any():
        empty = np.empty(0)
        return np.empty(0, dtype=int), empty, empty

    step = np.diff(neg.astype(np.int8))
    first = np.flatnonzero(step == 1) + 1
    last = np.flatnonzero(step == -1)
    if neg[0]:
        first = np.concatenate(([0], first))
    if neg[-1]:
        last = np.concatenate((last, [r.size - 1]))

    start = times[first].astype(float)
    inner = first > 0
    j = first[inner]
    r0, r1 = r[j - 1], r[j]
    start[inner] = times[j - 1] + (times[j] - times[j - 1]) * r0 / (r0 - r1)

    end = times[last].astype(float)
    inner = last < r.size - 1
    k = last[inner]
    r0, r1 = r[k], r[k + 1]
    end[inner] = times[k] + (times[k + 1] - times[k]) * r0 / (r0 - r1)

    return first, start, end


def scan_reserve(times: np.ndarray, r: np.ndarray, s_horizon: float, t_window: float) -> ParisianVerdict:
    """
    Verdict for one reserve path given as node values (no horizon checks).

    An excursion counts as entered in [0, S] when its first negative node lies
    at or before S. The interpolated entry of an excursion whose first
    negative node is past S may fall just inside S; such an excursion is
    ignored, which keeps Parisian ruin a subset of classical ruin.
    """
    k_s = last_node_within(times, s_horizon)
    if k_s < 0 or not (r[: k_s + 1] < 0).any():
        return NO_RUIN

    first, start, end = excursions_below_zero(times, r)
    eligible = first <= k_s
    first_hit = float(start[eligible][0])

    qualifying = eligible & (end - start >= t_window)
    if not qualifying.any():
        return ParisianVerdict(True, False, None, first_hit)
    tau = float(start[qualifying][0] + t_window)
    return ParisianVerdict(True, True, tau, first_hit)


def _check_detection_horizon(times: np.ndarray, s_horizon: float, t_window: float) -> None:
    if t_window < 0:
        raise DomainError(f"window must be >= 0, got {t_window}")
    if s_horizon < times[0]:
        raise DomainError(f"horizon {s_horizon} starts before the grid ({times[0]})")
    if s_horizon > times[-1] * (1 + _HORIZON_SLACK) + _HORIZON_SLACK:
        raise DomainError(f"horizon S={s_horizon:g} exceeds the grid end {times[-1]:g}")


def detect_parisian(path: RiskPath, s_horizon: float, t_window: float) -> ParisianVerdict:
    """
    Classical ruin: some node in [0, S] has R < 0. Parisian ruin: an excursion
    below 0 entered in [0, S] (first negative node ≤ S) lasts at least
    t_window; τ = entry + t_window.

    The grid only has to reach S. An excursion that closes inside the grid is
    fully measured; one still open at the grid end without reaching t_window
    leaves the verdict undecided when S + t_window lies past the grid, and
    that raises DomainError.
    """
    times = path.grid.nodes
    _check_detection_horizon(times, s_horizon, t_window)
    verdict = scan_reserve(times, path.r, s_horizon, t_window)
    if verdict.classical_ruin and not verdict.parisian_ruin and path.r[-1] < 0:
        # an eligible excursion still open short of t_window cannot be decided
        first, start, _ = excursions_below_zero(times, path.r)
        open_entry = float(start[-1])
        if first[-1] <= last_node_within(times, s_horizon):
            raise DomainError(
                f"excursion entered at {open_entry:g} is still open at the grid end "
                f"{times[-1]:g}; horizon S+T_u={s_horizon + t_window:g} exceeds the grid"
            )
    return verdict


def scan_batch(times: np.ndarray, r: np.ndarray, s_horizon: float, t_window: float) -> dict:
    """
    Vectorized verdicts for a (reps, n) block of reserve paths.

    Returns arrays: classical, parisian (bool), tau, first_hit (nan when absent).
    """
    check_horizon(times, s_horizon, t_window)
    reps = r.shape[0]
    k_s = last_node_within(times, s_horizon)
    classical = (r[:, : k_s + 1] < 0).any(axis=1)
    parisian = np.zeros(reps, dtype=bool)
    tau = np.full(reps, np.nan)
    first_hit = np.full(reps, np.nan)

    for i in np.flatnonzero(classical):
        verdict = scan_reserve(times, r[i], s_horizon, t_window)
        first_hit[i] = verdict.first_hit
        if verdict.parisian_ruin:
            parisian[i] = True
            tau[i] = verdict.tau

    return {"classical": classical, "parisian": parisian, "tau": tau, "first_hit": first_hit}
