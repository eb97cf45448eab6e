"""
Monte Carlo result container and the fixed-order reduction of per-replication
contributions.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass

import numpy as np

from config import CI_Z, ESS_WARN_FRACTION

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EstimateResult:
    estimate: float
    std_error: float
    ci_low: float
    ci_high: float
    reps: int
    seed: int
    effective_sample_size: float | None = None
    low_ess: bool = False

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def relative_error(self) -> float:
        return self.std_error / self.estimate if self.estimate > 0 else math.inf


def combine(contributions, weights=None, seed: int = 0) -> EstimateResult:
    """
    Reduce per-replication contributions, indexed by replication id, into an
    EstimateResult. Sums are exactly rounded (math.fsum) and taken in
    replication order, so the output does not depend on how replications were
    distributed over workers.

    `weights` are the importance weights (likelihood ratios) of the same
    replications, used only for the effective sample size.
    """
    values = np.asarray(contributions, dtype=float).ravel()
    reps = values.size
    if reps == 0:
        raise ValueError("combine needs at least one contribution")

    mean = math.fsum(values) / reps
    if reps > 1:
        var = math.fsum((values - mean) ** 2) / (reps - 1)
        std_error = math.sqrt(var / reps)
    else:
        std_error = 0.0

    ess = None
    low_ess = False
    if weights is not None:
        w = np.asarray(weights, dtype=float).ravel()
        sum_w2 = math.fsum(w * w)
        ess = math.fsum(w) ** 2 / sum_w2 if sum_w2 > 0 else 0.0
        low_ess = ess < ESS_WARN_FRACTION * reps

    half = CI_Z * std_error
    return EstimateResult(
        estimate=mean,
        std_error=std_error,
        ci_low=mean - half,
        ci_high=mean + half,
        reps=reps,
        seed=int(seed),
        effective_sample_size=ess,
        low_ess=low_ess,
    )
