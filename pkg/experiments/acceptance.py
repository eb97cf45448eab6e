"""
Acceptance suite behind the `validate` subcommand.

Each criterion runs a fixed experiment (mostly the fBm H=½, δ(t)=t, c=1, S=1
configuration) and reports a pass/fail row. Replication counts default to
desk scale and can be lowered for a quick smoke run.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from analysis.asympt import approx_ruin, normal_tail, piterbarg_tilde
from analysis.special import (
    VarianceModel,
    example1_display,
    example1_rate,
    example2_series,
    ruin_time_rate,
    sigma2,
)
from errors import RuinError
from experiments.commands import run_simulate
from experiments.experiment import Estimator, ExperimentConfig
from process.discount import DiscountSpec
from process.gauss_sim import RngStream, factorize_matrix
from process.kernels import CovKernel
from results import render_table
from simulation.montecarlo import (
    RuinSample,
    SimulationPlan,
    Verdict,
    estimate_linear_exceedance,
    likelihood_ratio_mean,
    ruin_time_law,
    sample_ruin,
)
from simulation.window import WindowRule

logger = logging.getLogger(__name__)

VALIDATE_COLUMNS = ["criterion", "name", "passed", "value", "target", "detail"]

EXAMPLE_HURST = 0.5
EXAMPLE_GRID_N = 2048
EXAMPLE_REPS = 200_000
FD_STEP = 1e-4


@dataclass(frozen=True)
class CriterionResult:
    criterion: int
    name: str
    passed: bool
    value: float
    target: str
    detail: str = ""
    elapsed_s: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class AcceptanceContext:
    """Shared inputs of one validate run, plus the desk-scale sample cache."""

    seed: int
    workers: int = 1
    reps_override: int | None = None
    chunk_reps: int = 512
    _samples: dict = field(default_factory=dict, repr=False)
    _plan: SimulationPlan | None = field(default=None, repr=False)

    def reps(self, default: int) -> int:
        return self.reps_override or default

    def example_config(self, **changes) -> ExperimentConfig:
        base = ExperimentConfig(
            kernel=CovKernel.fbm(EXAMPLE_HURST),
            discount=DiscountSpec.linear(1.0),
            c=1.0,
            s_horizon=1.0,
            window=WindowRule.c_over_u(1.0),
            u_values=(4.0, 6.0, 8.0),
            grid_n=EXAMPLE_GRID_N,
            reps=self.reps(EXAMPLE_REPS),
            estimator=Estimator.IMPORTANCE,
            seed=self.seed,
            output="validate.csv",
            chunk_reps=self.chunk_reps,
        )
        return base.with_overrides(**changes)

    def example_sample(self, u: float) -> RuinSample:
        """Importance-sampled paths of the example configuration at u, computed once."""
        if u not in self._samples:
            config = self.example_config()
            if self._plan is None:
                self._plan = SimulationPlan.from_config(config)
            self._samples[u] = sample_ruin(config, u=u, workers=self.workers, plan=self._plan)
        return self._samples[u]


def _example_model() -> VarianceModel:
    return VarianceModel(CovKernel.fbm(EXAMPLE_HURST), DiscountSpec.linear(1.0))


# ─── Criteria ───────────────────────────────────────────────

def closed_form_variance(ctx: AcceptanceContext) -> CriterionResult:
    worst = 0.0
    for hurst in (0.25, 0.5, 0.75):
        model = VarianceModel(CovKernel.fbm(hurst), DiscountSpec.linear(1.0))
        for t in (0.5, 1.0, 2.0):
            closed = 0.5 * example1_display(hurst, t)
            quad = sigma2(model, t, method="quadrature")
            worst = max(worst, abs(closed - quad) / quad)
    return CriterionResult(1, "closed_form_variance", worst <= 1e-6, worst, "rel diff <= 1e-6",
                           "display/2 vs double quadrature, H in {0.25,0.5,0.75}, t in {0.5,1,2}")


def series_variance(ctx: AcceptanceContext) -> CriterionResult:
    model = VarianceModel(CovKernel.scaled_bm(), DiscountSpec.linear(1.0))
    worst = max(abs(example2_series(t) - sigma2(model, t, method="quadrature"))
                for t in (0.25, 1.0, 2.0))
    t_small = 1e-3
    leading = example2_series(t_small) / (t_small * t_small)
    leading_rel = abs(leading / (2.0 / 3.0) - 1.0)
    passed = worst <= 1e-8 and leading_rel <= 1e-3
    return CriterionResult(2, "series_variance", passed, worst, "abs diff <= 1e-8",
                           f"series(t)/t^2 at t=1e-3 off 2/3 by {leading_rel:.2e} rel")


def derivative_identity(ctx: AcceptanceContext) -> CriterionResult:
    model = _example_model()
    closed = example1_rate(EXAMPLE_HURST, 1.0)
    var = sigma2(model, 1.0, method="quadrature")
    slope = (sigma2(model, 1.0 + FD_STEP, method="quadrature")
             - sigma2(model, 1.0 - FD_STEP, method="quadrature")) / (2.0 * FD_STEP)
    fd = slope / (2.0 * var * var)
    rel = abs(closed - fd) / abs(fd)
    return CriterionResult(3, "derivative_identity", rel <= 1e-4, closed, "rel diff <= 1e-4",
                           f"finite differences give {fd:.8f} (rel diff {rel:.2e})")


def _parisian_ratio(ctx: AcceptanceContext, u: float) -> tuple[float, float]:
    sample = ctx.example_sample(u)
    result = sample.estimate(Verdict.PARISIAN)
    report = approx_ruin(_example_model(), 1.0, u, 1.0)
    if result.estimate <= 0:
        return -math.inf, 0.0
    log_est = math.log(result.estimate)
    return log_est, math.exp(log_est - report.log_psi_approx)


def exact_asymptotics(ctx: AcceptanceContext) -> CriterionResult:
    _, ratio4 = _parisian_ratio(ctx, 4.0)
    _, ratio6 = _parisian_ratio(ctx, 6.0)
    passed = 0.7 <= ratio6 <= 1.4 and abs(ratio6 - 1.0) <= abs(ratio4 - 1.0)
    return CriterionResult(4, "exact_asymptotics", passed, ratio6, "ratio in [0.7, 1.4] at u=6",
                           f"ratio at u=4 is {ratio4:.4f}")


def log_scale_limit(ctx: AcceptanceContext) -> CriterionResult:
    target = approx_ruin(_example_model(), 1.0, 8.0, 1.0).log_scale_limit
    scaled = {u: _parisian_ratio(ctx, u)[0] / (u * u) for u in (4.0, 6.0, 8.0)}
    gaps = [abs(scaled[u] - target) for u in (4.0, 6.0, 8.0)]
    rel8 = gaps[-1] / abs(target)
    trending = gaps[0] >= gaps[1] >= gaps[2]
    passed = rel8 <= 0.15 and trending
    detail = ", ".join(f"u={u:g}: {v:.4f}" for u, v in scaled.items())
    return CriterionResult(5, "log_scale_limit", passed, rel8, "rel gap <= 0.15 at u=8",
                           f"{detail}; limit {target:.4f}")


def ordering_and_monotonicity(ctx: AcceptanceContext) -> CriterionResult:
    windows = (0.0, 0.01, 0.05)
    problems = []
    for k in range(3):
        config = ctx.example_config(
            c=0.1, u_values=(0.2,), grid_n=512, reps=ctx.reps(20_000),
            estimator=Estimator.CRUDE, seed=ctx.seed + k, window=WindowRule.fixed(0.0),
        )
        sample = sample_ruin(config, u=0.2, workers=ctx.workers, windows=windows)
        classical = sample.estimate(Verdict.CLASSICAL)
        estimates = [sample.estimate(Verdict.PARISIAN, i) for i in range(len(windows))]
        if np.any(sample.parisian & ~sample.classical):
            problems.append(f"seed {config.seed}: Parisian ruin without classical ruin")
        if any(b.estimate > a.estimate for a, b in zip(estimates, estimates[1:])):
            problems.append(f"seed {config.seed}: estimate increases with the window")
        if estimates[0] != classical:
            problems.append(f"seed {config.seed}: T=0 differs from the classical estimator")
    return CriterionResult(6, "ordering_and_monotonicity", not problems, float(len(problems)),
                           "0 violations", "; ".join(problems) or "3 seeds, T in {0, 0.01, 0.05}")


def ruin_time_law_check(ctx: AcceptanceContext) -> CriterionResult:
    sample = ctx.example_sample(6.0)
    rate = ruin_time_rate(_example_model(), 1.0)
    x_grid = np.linspace(0.0, 1.0, 41)
    law = ruin_time_law(sample, 1.0, rate, x_grid)
    passed = law.sup_distance <= 0.15
    return CriterionResult(7, "ruin_time_law", passed, law.sup_distance, "sup distance <= 0.15",
                           f"rate {rate:.4f}, conditional ESS {law.effective_sample_size:.0f}")


def importance_unbiasedness(ctx: AcceptanceContext) -> CriterionResult:
    fk = factorize_matrix(np.array([[1.0]]), [1.0], label="N(0,1)")
    reps = ctx.reps(20_000)
    worst = 0.0
    for g in (2.0, 4.0, 6.0):
        result = estimate_linear_exceedance(fk, [1.0], g, reps, ctx.seed)
        worst = max(worst, abs(result.estimate - normal_tail(g)) / result.std_error)

    config = ctx.example_config(c=0.1, u_values=(0.4,), grid_n=256, reps=reps,
                                window=WindowRule.fixed(0.0))
    lr = likelihood_ratio_mean(config, u=0.4, workers=ctx.workers)
    lr_z = abs(lr.estimate - 1.0) / lr.std_error
    passed = worst <= 3.0 and lr_z <= 3.0
    return CriterionResult(8, "importance_unbiasedness", passed, worst, "|z| <= 3",
                           f"1-node worst |z| {worst:.2f}; likelihood ratio mean "
                           f"{lr.estimate:.4f} (|z| {lr_z:.2f})")


def pickands_estimators(ctx: AcceptanceContext) -> CriterionResult:
    reps = ctx.reps(4_000)
    base = RngStream(ctx.seed)
    problems = []
    far_drift = None
    for i, alpha in enumerate((1.0, 2.0)):
        for j, t_horizon in enumerate((0.0, 1.0, 2.0)):
            rng = base.substream(3 * i + j)
            previous = None
            for q_drift in (0.0, 5.0, 50.0):
                result = piterbarg_tilde(alpha, q_drift, t_horizon, reps, 256, rng)
                tag = f"alpha={alpha:g} T={t_horizon:g} Q={q_drift:g}"
                if t_horizon == 0 and (result.estimate != 1.0 or result.std_error != 0.0):
                    problems.append(f"{tag}: not exactly 1")
                if result.estimate > 1.0:
                    problems.append(f"{tag}: above 1")
                if previous is not None and result.estimate < previous:
                    problems.append(f"{tag}: decreased in Q")
                previous = result.estimate
                if alpha == 2.0 and t_horizon == 1.0 and q_drift == 50.0:
                    far_drift = result
    if abs(far_drift.estimate - 1.0) > 2.0 * far_drift.std_error:
        problems.append("H~_2^50(1) not within 2 SE of 1")
    return CriterionResult(9, "pickands_estimators", not problems, far_drift.estimate,
                           "H~_2^50(1) within 2 SE of 1", "; ".join(problems) or "all checks hold")


def determinism(ctx: AcceptanceContext) -> CriterionResult:
    config = ctx.example_config(u_values=(0.5, 1.0), grid_n=128, reps=ctx.reps(3_000),
                                chunk_reps=256, window=WindowRule.fixed(0.05))
    many = max(2, ctx.workers)
    tables = []
    for workers in (1, many):
        out = run_simulate(config, workers=workers, plan=SimulationPlan.from_config(config))
        tables.append(render_table(out.columns, out.rows))
    same = tables[0] == tables[1]
    return CriterionResult(10, "determinism", same, 1.0 if same else 0.0, "byte-identical CSV",
                           f"workers 1 vs {many}")


CRITERIA = (
    closed_form_variance,
    series_variance,
    derivative_identity,
    exact_asymptotics,
    log_scale_limit,
    ordering_and_monotonicity,
    ruin_time_law_check,
    importance_unbiasedness,
    pickands_estimators,
    determinism,
)


def run_validate(ctx: AcceptanceContext, only=None) -> list[CriterionResult]:
    """Run the criteria (all, or the numbers in `only`) in order."""
    results = []
    for number, check in enumerate(CRITERIA, start=1):
        if only and number not in only:
            continue
        started = time.monotonic()
        try:
            result = check(ctx)
        except RuinError as e:
            logger.error(f"Criterion {number} ({check.__name__}) raised: {e}")
            result = CriterionResult(number, check.__name__, False, math.nan, "", f"error: {e}")
        elapsed = round(time.monotonic() - started, 2)
        result = CriterionResult(**{**result.to_dict(), "elapsed_s": elapsed})
        status = "✅ pass" if result.passed else "❌ fail"
        logger.info(f"{status} [{number}] {result.name}: {result.value:.6g} ({result.detail}, {elapsed}s)")
        results.append(result)
    return results
