"""
Monte Carlo estimation of classical ruin ψ_S(u), Parisian ruin P_S(u,T_u) and
the conditional ruin-time law, by crude sampling or by mean-shift importance
sampling.

Replication i always draws its normals from RngStream(seed, i). Replications
are grouped into chunks of fixed size (independent of the worker count) and
reduced in replication order, so every output bit is determined by the
config and seed alone.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numpy as np

from analysis.asympt import barrier, ruin_time_limit_cdf
from analysis.special import VarianceModel, ruin_time_rate
from config import MIN_CONDITIONAL_ESS, MIN_REPS
from errors import DomainError, NumericalError
from experiments.experiment import Estimator, ExperimentConfig
from process.gauss_sim import FactorizedKernel, Grid, RngStream, factorize
from process.riskproc import RiskPathBuilder, scan_batch
from simulation.estimates import EstimateResult, combine
from task_manager import task_manager

logger = logging.getLogger(__name__)


class Verdict(str, Enum):
    CLASSICAL = "classical"
    PARISIAN = "parisian"


# ─── Plan ───────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class SimulationPlan:
    """Immutable state shared by all workers: grid, factor, reserve builder."""

    config: ExperimentConfig
    grid: Grid
    fk: FactorizedKernel
    builder: RiskPathBuilder

    @classmethod
    def from_config(cls, config: ExperimentConfig, extra_windows=()) -> SimulationPlan:
        longest = max([config.max_window, *extra_windows])
        grid = Grid.for_kernel(config.kernel, config.s_horizon + longest, config.grid_n)
        fk = factorize(config.kernel, grid)
        builder = RiskPathBuilder(grid, config.discount, config.c)
        logger.info(
            f"Plan: {config.kernel.label}, {config.discount.label}, {grid.describe()}, "
            f"jitter={fk.jitter_used:.1e}"
        )
        return cls(config=config, grid=grid, fk=fk, builder=builder)

    @property
    def times(self) -> np.ndarray:
        return self.builder.times

    def shift_direction(self) -> tuple[np.ndarray, float]:
        """
        Lᵀa and aᵀΣa for the trapezoid weights a of Y(S). The importance mean
        λΣa whitens to v = λ·Lᵀa, so no inverse of Σ is ever formed.
        """
        a = self.builder.trapezoid_weights(self.config.s_horizon)
        lt_a = self.fk.lower.T @ a
        a_sigma_a = float(lt_a @ lt_a)
        if not a_sigma_a > 0:
            raise NumericalError(f"a'Σa = {a_sigma_a} is not positive; cannot shift the mean")
        return lt_a, a_sigma_a


@dataclass(frozen=True, eq=False)
class RuinSample:
    """Per-replication outcomes for one u, possibly under several windows."""

    u: float
    windows: tuple[float, ...]
    classical: np.ndarray
    parisian: np.ndarray  # (len(windows), reps)
    tau: np.ndarray  # (len(windows), reps), nan without Parisian ruin
    log_weight: np.ndarray
    seed: int
    shift: float

    @property
    def reps(self) -> int:
        return self.classical.size

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weight)

    def indicator(self, which: Verdict, window_index: int = 0) -> np.ndarray:
        if which is Verdict.CLASSICAL:
            return self.classical
        return self.parisian[window_index]

    def estimate(self, which: Verdict, window_index: int = 0) -> EstimateResult:
        hits = self.indicator(which, window_index).astype(float)
        if self.shift == 0.0:
            return combine(hits, seed=self.seed)
        contrib = hits * self.weights
        return combine(contrib, weights=contrib, seed=self.seed)


# ─── Sampling core ──────────────────────────────────────────

def _draw_normals(seed: int, first: int, last: int, n: int) -> np.ndarray:
    return np.stack([RngStream(seed, i).standard_normal(n) for i in range(first, last)])


def sample_ruin(
    config: ExperimentConfig,
    u: float | None = None,
    importance: bool | None = None,
    workers: int = 1,
    plan: SimulationPlan | None = None,
    windows=None,
    shift_scale: float = 1.0,
) -> RuinSample:
    """
    Simulate config.reps reserve paths for initial reserve u and record the
    classical and Parisian verdicts on the same paths.

    With importance sampling, Z is drawn from N(λΣa, Σ) where aᵀZ is the
    discretized Y(S) and λ = shift_scale·(u + cδ̃(S))/(aᵀΣa); each replication
    carries log weight −λaᵀW + ½λ²aᵀΣa.
    """
    u = config.u_values[0] if u is None else float(u)
    if importance is None:
        importance = config.estimator is Estimator.IMPORTANCE
    if config.reps < MIN_REPS:
        raise DomainError(f"reps must be >= {MIN_REPS}, got {config.reps}")
    windows = (config.t_window(u),) if windows is None else tuple(float(w) for w in windows)
    if plan is None:
        plan = SimulationPlan.from_config(config, extra_windows=windows)

    fk, builder, times = plan.fk, plan.builder, plan.times
    s_horizon, seed, reps = config.s_horizon, config.seed, config.reps

    v = np.zeros(fk.n)
    shift = 0.0
    if importance and shift_scale != 0.0:
        lt_a, a_sigma_a = plan.shift_direction()
        shift = shift_scale * barrier(VarianceModel(config.kernel, config.discount),
                                      config.c, u, s_horizon) / a_sigma_a
        v = shift * lt_a
    half_v2 = 0.5 * float(v @ v)

    chunk = config.chunk_reps
    bounds = [(lo, min(reps, lo + chunk)) for lo in range(0, reps, chunk)]
    task_key = f"ruin:u={u:g}:{'is' if importance else 'crude'}"
    task_manager.start_task(task_key, total=len(bounds), message=f"Simulating {reps} paths at u={u:g}")

    def run_chunk(span):
        lo, hi = span
        xi = _draw_normals(seed, lo, hi, fk.n)
        z = fk.transform(xi + v)
        r = builder.reserve(z, u)
        verdicts = [scan_batch(times, r, s_horizon, w) for w in windows]
        log_w = -(xi @ v) - half_v2
        task_manager.advance(task_key)
        return verdicts, log_w

    started = time.monotonic()
    try:
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                outputs = list(pool.map(run_chunk, bounds))
        else:
            outputs = [run_chunk(span) for span in bounds]
    except Exception as e:
        task_manager.fail_task(task_key, str(e))
        raise

    classical = np.concatenate([out[0][0]["classical"] for out in outputs])
    parisian = np.stack([
        np.concatenate([out[0][k]["parisian"] for out in outputs]) for k in range(len(windows))
    ])
    tau = np.stack([
        np.concatenate([out[0][k]["tau"] for out in outputs]) for k in range(len(windows))
    ])
    log_weight = np.concatenate([out[1] for out in outputs])

    stats = {
        "u": u,
        "reps": reps,
        "chunks": len(bounds),
        "workers": workers,
        "classical_hits": int(classical.sum()),
        "parisian_hits": [int(p.sum()) for p in parisian],
        "shift": shift,
        "elapsed_s": round(time.monotonic() - started, 3),
    }
    task_manager.complete_task(task_key, "Simulation finished", stats)
    logger.info(f"Ruin simulation done: {stats}")

    return RuinSample(u=u, windows=windows, classical=classical, parisian=parisian, tau=tau,
                      log_weight=log_weight, seed=seed, shift=shift)


# ─── Estimators ─────────────────────────────────────────────

def estimate_ruin(config: ExperimentConfig, which: Verdict, u: float | None = None,
                  workers: int = 1, plan: SimulationPlan | None = None) -> EstimateResult:
    """Crude estimator: mean of the ruin indicator over config.reps replications."""
    sample = sample_ruin(config, u=u, importance=False, workers=workers, plan=plan)
    result = sample.estimate(Verdict(which))
    if result.estimate == 0.0:
        logger.warning(
            f"Crude estimator saw no {Verdict(which).value} ruin in {result.reps} paths at "
            f"u={sample.u:g}; use the importance estimator for rare events"
        )
    return result


def estimate_ruin_importance(config: ExperimentConfig, which: Verdict, u: float | None = None,
                             workers: int = 1, plan: SimulationPlan | None = None,
                             shift_scale: float = 1.0) -> EstimateResult:
    """Mean-shift importance sampling estimator; shift_scale=0 gives the crude estimator."""
    sample = sample_ruin(config, u=u, importance=True, workers=workers, plan=plan,
                         shift_scale=shift_scale)
    result = sample.estimate(Verdict(which))
    if result.low_ess:
        logger.warning(
            f"Low effective sample size {result.effective_sample_size:.1f} of {result.reps} "
            f"for {Verdict(which).value} ruin at u={sample.u:g}"
        )
    return result


def estimate_both(config: ExperimentConfig, u: float, workers: int = 1,
                  plan: SimulationPlan | None = None) -> dict[Verdict, EstimateResult]:
    """Classical and Parisian estimates from the same paths (common random numbers)."""
    sample = sample_ruin(config, u=u, workers=workers, plan=plan)
    return {which: sample.estimate(which) for which in Verdict}


def likelihood_ratio_mean(config: ExperimentConfig, u: float | None = None, workers: int = 1,
                          plan: SimulationPlan | None = None) -> EstimateResult:
    """Mean of the importance weights over all draws; 1 in expectation."""
    sample = sample_ruin(config, u=u, importance=True, workers=workers, plan=plan)
    return combine(sample.weights, seed=sample.seed)


def estimate_linear_exceedance(fk: FactorizedKernel, direction, level: float, reps: int,
                               seed: int, shift_scale: float = 1.0) -> EstimateResult:
    """
    P(aᵀW > level) for W ~ N(0, Σ = LLᵀ) with the same mean shift used for
    ruin: W ~ N(λΣa, Σ), λ = shift_scale·level/(aᵀΣa). On a one-node grid this
    is the Gaussian tail Ψ(level/σ).
    """
    a = np.asarray(direction, dtype=float)
    lt_a = fk.lower.T @ a
    a_sigma_a = float(lt_a @ lt_a)
    if not a_sigma_a > 0:
        raise NumericalError("a'Σa must be positive")
    v = shift_scale * level / a_sigma_a * lt_a
    xi = _draw_normals(seed, 0, reps, fk.n)
    w_paths = fk.transform(xi + v)
    hits = (w_paths @ a > level).astype(float)
    weights = np.exp(-(xi @ v) - 0.5 * float(v @ v))
    contrib = hits * weights
    return combine(contrib, weights=contrib, seed=seed)


# ─── Conditional ruin time ──────────────────────────────────

@dataclass(frozen=True)
class RuinTimeLaw:
    u: float
    t_window: float
    rate: float
    x_grid: tuple[float, ...]
    empirical: tuple[float, ...]
    limit: tuple[float, ...]
    sup_distance: float
    grid_distance: float
    conditional_count: int
    effective_sample_size: float
    low_confidence: bool


def estimate_ruin_time_distribution(config: ExperimentConfig, x_grid=None, u: float | None = None,
                                    workers: int = 1,
                                    plan: SimulationPlan | None = None) -> RuinTimeLaw:
    """
    Weighted empirical CDF of u²(S + T_u − τ(u)) given Parisian ruin, from the
    importance-sampled paths, next to the limit 1 − exp(−rate·x).
    """
    x_grid = tuple(config.x_grid if x_grid is None else x_grid)
    u = config.u_values[0] if u is None else float(u)
    sample = sample_ruin(config, u=u, importance=True, workers=workers, plan=plan)
    rate = ruin_time_rate(VarianceModel(config.kernel, config.discount), config.s_horizon)
    return ruin_time_law(sample, config.s_horizon, rate, x_grid)


def ruin_time_law(sample: RuinSample, s_horizon: float, rate: float, x_grid) -> RuinTimeLaw:
    """Conditional ruin-time law from an existing sample (first window)."""
    x_grid = tuple(float(x) for x in x_grid)
    if any(b <= a for a, b in zip(x_grid, x_grid[1:])):
        raise DomainError("x_grid must be increasing")
    u = sample.u
    t_window = sample.windows[0]
    ruined = sample.parisian[0]

    x = u * u * (s_horizon + t_window - sample.tau[0][ruined])
    w = sample.weights[ruined]
    count = int(ruined.sum())
    sum_w = math.fsum(w)
    ess = sum_w**2 / math.fsum(w * w) if count else 0.0
    low_confidence = ess < MIN_CONDITIONAL_ESS
    if low_confidence:
        logger.warning(f"Only {ess:.1f} effective conditional samples at u={u:g}; "
                       f"ruin-time law is low-confidence")

    limit = tuple(ruin_time_limit_cdf(rate, xv) for xv in x_grid)
    if count == 0:
        empirical = tuple(0.0 for _ in x_grid)
        return RuinTimeLaw(u, t_window, rate, x_grid, empirical, limit, math.nan, math.nan,
                           0, 0.0, True)

    order = np.argsort(x, kind="stable")
    xs = x[order]
    cum = np.minimum(np.cumsum(w[order]) / sum_w, 1.0)
    empirical = tuple(float(cum[k - 1]) if k > 0 else 0.0
                      for k in np.searchsorted(xs, x_grid, side="right"))

    lim = -np.expm1(-rate * xs)
    before = np.concatenate(([0.0], cum[:-1]))
    sup_distance = float(max(np.max(np.abs(cum - lim)), np.max(np.abs(before - lim))))
    grid_distance = max(abs(e - l) for e, l in zip(empirical, limit)) if x_grid else math.nan

    return RuinTimeLaw(u, t_window, rate, x_grid, empirical, limit, sup_distance, grid_distance,
                       count, ess, low_confidence)


# ─── Diagnostics ────────────────────────────────────────────

def count_level_crossings(path, grid: Grid, level: float) -> int:
    """Sign changes of (path − level) between consecutive nodes; values at the level count as above."""
    path = np.asarray(path, dtype=float)
    if path.size != grid.n:
        raise DomainError(f"path length {path.size} does not match grid with {grid.n} nodes")
    above = path >= level
    return int(np.count_nonzero(above[1:] != above[:-1]))
