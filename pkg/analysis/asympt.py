"""
Exact asymptotics of Parisian/classical ruin for large initial reserve u,
the limit law of the conditional ruin time, and Monte Carlo estimators of
the generalized Pickands and Piterbarg constants.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import special as sc

from analysis.special import VarianceModel, g_u, ruin_time_rate, sigma2
from errors import DomainError
from process.discount import delta_tilde
from process.gauss_sim import FactorizedKernel, Grid, RngStream, factorize
from process.kernels import CovKernel
from simulation.estimates import EstimateResult, combine

logger = logging.getLogger(__name__)

_SQRT2 = math.sqrt(2.0)
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
CONSTANT_CHUNK_REPS = 1024


# ─── Normal tail ────────────────────────────────────────────

def normal_tail(x: float) -> float:
    """Ψ(x) = P(N > x) = ½·erfc(x/√2)."""
    return 0.5 * float(sc.erfc(x / _SQRT2))


def log_normal_tail(x: float) -> float:
    """log Ψ(x), finite far beyond the underflow point of Ψ."""
    return float(sc.log_ndtr(-x))


# ─── Ruin asymptotics ───────────────────────────────────────

@dataclass(frozen=True)
class AsymptoticReport:
    u: float
    c: float
    s_horizon: float
    sigma2: float
    g: float
    psi_approx: float
    log_psi_approx: float
    log_scale_limit: float
    ruin_time_rate: float
    log_mills_approx: float | None
    upper_bound: float

    def to_dict(self) -> dict:
        return asdict(self)


def approx_ruin(model: VarianceModel, c: float, u: float, s_horizon: float) -> AsymptoticReport:
    """
    P_S(u,T_u) ~ ψ_S(u) ~ Ψ(g_u(S)) for T_u → 0, log P_S(u,T_u)/u² → −1/(2σ²(S)),
    and the rate σ'(S)/σ³(S) of the limiting ruin-time law.
    """
    if not s_horizon > 0:
        raise DomainError(f"horizon must be > 0, got {s_horizon}")
    var = sigma2(model, s_horizon)
    sigma = math.sqrt(var)
    g = g_u(model, c, u, s_horizon)

    if u > 0:
        # Mills-ratio form: σ/(u√(2π))·exp(−(u+cδ̃(S))²/(2σ²))
        log_mills = math.log(sigma / u) - _LOG_SQRT_2PI - 0.5 * g * g
    else:
        log_mills = None

    return AsymptoticReport(
        u=float(u),
        c=float(c),
        s_horizon=float(s_horizon),
        sigma2=var,
        g=g,
        psi_approx=normal_tail(g),
        log_psi_approx=log_normal_tail(g),
        log_scale_limit=-1.0 / (2.0 * var),
        ruin_time_rate=ruin_time_rate(model, s_horizon),
        log_mills_approx=log_mills,
        upper_bound=min(1.0, 2.0 * normal_tail(u / sigma)),
    )


def barrier(model: VarianceModel, c: float, u: float, s_horizon: float) -> float:
    """u + c·δ̃(S), the level the discounted loss must reach at S."""
    return u + c * delta_tilde(model.discount, s_horizon)


def ruin_time_limit_cdf(rate: float, x: float) -> float:
    """Limit law of u²(S + T_u − τ(u)) given ruin: 1 − exp(−rate·x)."""
    if not rate > 0:
        raise DomainError(f"rate must be > 0, got {rate}")
    if x < 0:
        return 0.0
    return -math.expm1(-rate * x)


# ─── Pickands / Piterbarg constants ─────────────────────────

def _fbm_alpha_factor(alpha: float, t_horizon: float, grid_n: int) -> FactorizedKernel:
    """Factor of B_α (Var B_α(s) = s^α) on n nodes of [0, T]; s=0 is pinned at 0."""
    if alpha == 2.0:
        # B_2(s) = s·N is rank one
        times = np.linspace(0.0, t_horizon, grid_n)
        lower = np.zeros((grid_n, grid_n))
        lower[1:, 1] = times[1:]
        active = np.zeros(grid_n, dtype=bool)
        active[1] = True
        return FactorizedKernel(times=times, lower=lower, jitter_used=0.0,
                                label=f"B_2 on [0, {t_horizon:g}]", active=active)
    return factorize(CovKernel.fbm(alpha / 2.0), Grid(0.0, t_horizon, grid_n))


def piterbarg_tilde(alpha: float, q_drift: float, t_horizon: float, reps: int,
                    grid_n: int, rng: RngStream) -> EstimateResult:
    """
    E[exp(inf_{s∈[0,T]} (√2·B_α(s) − s^α + Q·s))] on a uniform grid.

    Draws from the start of the stream identified by `rng`, so calls sharing a
    stream use common random numbers. The grid infimum is never below the
    continuum one, so estimates carry an upward discretization bias that shrinks
    as grid_n grows.
    """
    if not 0.0 < alpha <= 2.0:
        raise DomainError(f"alpha must be in (0, 2], got {alpha}")
    if t_horizon < 0 or q_drift < 0:
        raise DomainError("t_horizon and q_drift must be >= 0")
    if reps < 1 or grid_n < 2:
        raise DomainError("need reps >= 1 and grid_n >= 2")

    if t_horizon == 0:
        return combine(np.ones(reps), seed=rng.seed)

    fk = _fbm_alpha_factor(alpha, t_horizon, grid_n)
    s = fk.times
    drift = -(s**alpha) + q_drift * s
    stream = RngStream(rng.seed, rng.stream_id)

    values = np.empty(reps)
    for lo in range(0, reps, CONSTANT_CHUNK_REPS):
        hi = min(reps, lo + CONSTANT_CHUNK_REPS)
        xi = stream.standard_normal((hi - lo) * fk.n).reshape(hi - lo, fk.n)
        paths = _SQRT2 * fk.transform(xi) + drift
        values[lo:hi] = np.exp(np.minimum(paths.min(axis=1), 0.0))

    result = combine(values, seed=rng.seed)
    logger.debug("H~(alpha=%g, Q=%g, T=%g) = %.6f ± %.2e", alpha, q_drift, t_horizon,
                 result.estimate, result.std_error)
    return result


def pickands_tilde(alpha: float, t_horizon: float, reps: int, grid_n: int,
                   rng: RngStream) -> EstimateResult:
    """E[exp(inf_{s∈[0,T]} (√2·B_α(s) − s^α))]; the Q = 0 case of piterbarg_tilde."""
    return piterbarg_tilde(alpha, 0.0, t_horizon, reps, grid_n, rng)
