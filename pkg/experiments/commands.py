"""
Subcommand bodies. Each builds the rows of one result table from an
ExperimentConfig and returns a CommandOutput; writing files is left to the
caller so that a failure never leaves partial output behind.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

from analysis.asympt import approx_ruin, piterbarg_tilde
from analysis.special import (
    VarianceModel,
    closed_form_available,
    example1_display,
    sigma2,
    sigma2_derivative,
)
from experiments.experiment import Estimator, ExperimentConfig
from process.gauss_sim import RngStream
from simulation.montecarlo import (
    SimulationPlan,
    Verdict,
    estimate_ruin_time_distribution,
    sample_ruin,
)

logger = logging.getLogger(__name__)


@dataclass
class CommandOutput:
    columns: list[str]
    rows: list[dict]
    extra: dict = field(default_factory=dict)


def _model(config: ExperimentConfig) -> VarianceModel:
    return VarianceModel(config.kernel, config.discount)


# ─── variance ───────────────────────────────────────────────

VARIANCE_COLUMNS = ["t", "sigma2", "sigma2_derivative", "closed_form", "quadrature",
                    "closed_form_rel_diff", "example_display"]


def run_variance(config: ExperimentConfig, workers: int = 1) -> CommandOutput:
    model = _model(config)
    has_closed = closed_form_available(model)
    hurst = model.hurst
    shows_display = hurst is not None and model.has_unit_linear_discount
    rows = []
    for t in config.t_grid:
        quad = sigma2(model, t, method="quadrature")
        closed = sigma2(model, t, method="closed") if has_closed else None
        rows.append({
            "t": t,
            "sigma2": closed if closed is not None else quad,
            "sigma2_derivative": sigma2_derivative(model, t),
            "closed_form": closed,
            "quadrature": quad,
            "closed_form_rel_diff": abs(closed - quad) / quad if closed is not None else None,
            "example_display": example1_display(hurst, t) if shows_display else None,
        })
    logger.info(f"📈 Variance table: {len(rows)} points, closed form {'on' if has_closed else 'off'}")
    return CommandOutput(VARIANCE_COLUMNS, rows, {"closed_form_available": has_closed})


# ─── approx ─────────────────────────────────────────────────

APPROX_COLUMNS = ["u", "t_window", "sigma2", "g", "psi_approx", "log_psi_approx",
                  "log_psi_over_u2", "log_scale_limit", "ruin_time_rate", "log_mills_approx",
                  "upper_bound"]


def run_approx(config: ExperimentConfig, workers: int = 1) -> CommandOutput:
    model = _model(config)
    rows = []
    for u in config.u_values:
        report = approx_ruin(model, config.c, u, config.s_horizon)
        rows.append({
            "u": u,
            "t_window": config.t_window(u),
            "sigma2": report.sigma2,
            "g": report.g,
            "psi_approx": report.psi_approx,
            "log_psi_approx": report.log_psi_approx,
            "log_psi_over_u2": report.log_psi_approx / (u * u),
            "log_scale_limit": report.log_scale_limit,
            "ruin_time_rate": report.ruin_time_rate,
            "log_mills_approx": report.log_mills_approx,
            "upper_bound": report.upper_bound,
        })
    return CommandOutput(APPROX_COLUMNS, rows)


# ─── simulate ───────────────────────────────────────────────

SIMULATE_COLUMNS = ["u", "t_window", "which", "estimate", "std_error", "ci_low", "ci_high",
                    "reps", "effective_sample_size", "seed", "psi_approx", "ratio", "log_ratio"]


def run_simulate(config: ExperimentConfig, workers: int = 1,
                 plan: SimulationPlan | None = None) -> CommandOutput:
    """Classical and Parisian estimates per u, from the same paths, against Ψ(g_u(S))."""
    model = _model(config)
    plan = plan or SimulationPlan.from_config(config)
    rows = []
    warnings = 0
    for u in config.u_values:
        report = approx_ruin(model, config.c, u, config.s_horizon)
        sample = sample_ruin(config, u=u, workers=workers, plan=plan)
        for which in Verdict:
            result = sample.estimate(which)
            if result.estimate > 0:
                log_ratio = math.log(result.estimate) - report.log_psi_approx
            else:
                log_ratio = -math.inf
                if config.estimator is Estimator.CRUDE:
                    warnings += 1
                    logger.warning(
                        f"⚠️  Crude estimator saw no {which.value} ruin at u={u:g} in "
                        f"{result.reps} paths; rerun with estimator=importance"
                    )
            if result.low_ess:
                warnings += 1
                logger.warning(f"⚠️  Low effective sample size at u={u:g} ({which.value})")
            rows.append({
                "u": u,
                "t_window": sample.windows[0],
                "which": which.value,
                "estimate": result.estimate,
                "std_error": result.std_error,
                "ci_low": result.ci_low,
                "ci_high": result.ci_high,
                "reps": result.reps,
                "effective_sample_size": result.effective_sample_size,
                "seed": result.seed,
                "psi_approx": report.psi_approx,
                "ratio": math.exp(log_ratio),
                "log_ratio": log_ratio,
            })
    return CommandOutput(SIMULATE_COLUMNS, rows, {"warnings": warnings,
                                                  "estimator": config.estimator.value})


# ─── ruintime ───────────────────────────────────────────────

RUINTIME_COLUMNS = ["u", "t_window", "x", "empirical", "limit", "abs_diff", "rate",
                    "sup_distance", "conditional_count", "effective_sample_size",
                    "low_confidence"]


def run_ruintime(config: ExperimentConfig, workers: int = 1) -> CommandOutput:
    plan = SimulationPlan.from_config(config)
    rows = []
    for u in config.u_values:
        law = estimate_ruin_time_distribution(config, u=u, workers=workers, plan=plan)
        for x, emp, lim in zip(law.x_grid, law.empirical, law.limit):
            rows.append({
                "u": u,
                "t_window": law.t_window,
                "x": x,
                "empirical": emp,
                "limit": lim,
                "abs_diff": abs(emp - lim),
                "rate": law.rate,
                "sup_distance": law.sup_distance,
                "conditional_count": law.conditional_count,
                "effective_sample_size": law.effective_sample_size,
                "low_confidence": law.low_confidence,
            })
    return CommandOutput(RUINTIME_COLUMNS, rows)


# ─── pickands ───────────────────────────────────────────────

PICKANDS_COLUMNS = ["alpha", "t_horizon", "q_drift", "estimate", "std_error", "ci_low",
                    "ci_high", "reps", "grid_n", "seed"]


def run_pickands(config: ExperimentConfig, workers: int = 1) -> CommandOutput:
    """
    H̃_α^Q(T) over the configured (α, T, Q); Q = 0 is H̃_α(T). All Q for one
    (α, T) share a random stream, so rows are pathwise comparable in Q.
    """
    base = RngStream(config.seed)
    rows = []
    for i, alpha in enumerate(config.alphas):
        for j, t_horizon in enumerate(config.t_values):
            rng = base.substream(i * len(config.t_values) + j)
            for q_drift in config.q_values:
                result = piterbarg_tilde(alpha, q_drift, t_horizon, config.reps,
                                         config.grid_n, rng)
                rows.append({
                    "alpha": alpha,
                    "t_horizon": t_horizon,
                    "q_drift": q_drift,
                    "estimate": result.estimate,
                    "std_error": result.std_error,
                    "ci_low": result.ci_low,
                    "ci_high": result.ci_high,
                    "reps": result.reps,
                    "grid_n": config.grid_n,
                    "seed": result.seed,
                })
    return CommandOutput(PICKANDS_COLUMNS, rows)
