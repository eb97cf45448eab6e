"""
Variance function σ²(t) = Var(Y(t)) of the integrated loss, its derivative,
the normalized barrier g_u(t), and the closed forms of the fBm and scaled-BM
examples (including the incomplete-gamma pair Γ(a,t), Γ*(a,t)).
"""

from __future__ import annotations

import logging
import math
import threading
from dataclasses import dataclass, field
from functools import lru_cache

from scipy import integrate, special

from config import (
    EXAMPLE2_MAX_T,
    EXAMPLE2_TAIL_TOL,
    QUAD_EPSABS_1D,
    QUAD_EPSABS_2D,
    QUAD_EPSREL_1D,
    QUAD_EPSREL_2D,
    QUAD_FAILURE_TOL,
    QUAD_LIMIT,
    SERIES_MAX_TERMS,
    SERIES_TOL,
)
from errors import DomainError, NumericalError, QuadratureError
from process.discount import DiscountKind, DiscountSpec, delta_tilde
from process.kernels import CovKernel, KernelFamily, cov

logger = logging.getLogger(__name__)

METHODS = ("auto", "closed", "quadrature")


@dataclass(eq=False)
class VarianceModel:
    """Kernel + discount, with a lock-guarded cache of σ²(t) evaluations."""

    kernel: CovKernel
    discount: DiscountSpec
    use_cache: bool = True
    _cache: dict = field(default_factory=dict, init=False, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, init=False, repr=False)

    def cached(self, key, compute):
        if not self.use_cache:
            return compute()
        with self._lock:
            if key in self._cache:
                return self._cache[key]
        value = compute()
        with self._lock:
            self._cache.setdefault(key, value)
        return value

    @property
    def hurst(self) -> float | None:
        if self.kernel.family is KernelFamily.FBM:
            return self.kernel.hurst
        if self.kernel.family is KernelFamily.BM:
            return 0.5
        return None

    @property
    def has_unit_linear_discount(self) -> bool:
        return self.discount.kind is DiscountKind.LINEAR and self.discount.rate == 1.0


# ─── Incomplete gamma pair ──────────────────────────────────

def _check_gamma_args(a: float, t: float) -> None:
    if not a > 0:
        raise DomainError(f"incomplete gamma needs a > 0, got {a}")
    if t < 0:
        raise DomainError(f"incomplete gamma needs t >= 0, got {t}")


def inc_gamma_lower(a: float, t: float) -> float:
    """Γ(a,t) = ∫₀ᵗ x^{a−1} e^{−x} dx (unregularized lower incomplete gamma)."""
    _check_gamma_args(a, t)
    return float(special.gammainc(a, t) * special.gamma(a))


def inc_gamma_star(a: float, t: float) -> float:
    """
    Γ*(a,t) = ∫₀ᵗ x^{a−1} eˣ dx = Σ_{k≥0} t^{a+k} / (k!·(a+k)).

    Terms are generated from p_k = t^k/k!; the sum stops once a term falls
    below SERIES_TOL of the partial sum.
    """
    _check_gamma_args(a, t)
    if t == 0:
        return 0.0
    power = 1.0
    total = 0.0
    for k in range(SERIES_MAX_TERMS):
        term = power / (a + k)
        total += term
        if k > t and term < SERIES_TOL * total:
            return t**a * total
        power *= t / (k + 1)
    raise NumericalError(f"Γ*({a}, {t}) series did not converge in {SERIES_MAX_TERMS} terms")


# ─── Example closed forms ───────────────────────────────────

def example1_display(hurst: float, t: float) -> float:
    """
    Γ(2H+1,t)(1−2e^{−t}) + e^{−2t}Γ*(2H+1,t): the fBm/δ(t)=t expression
    as usually displayed. It integrates the unhalved fBm covariance, so it
    equals 2σ²(t) for the kernel ½(t^{2H}+s^{2H}−|t−s|^{2H}).
    """
    if t == 0:
        return 0.0
    a = 2.0 * hurst + 1.0
    return inc_gamma_lower(a, t) * (1.0 - 2.0 * math.exp(-t)) + math.exp(-2.0 * t) * inc_gamma_star(a, t)


def example1_derivative(hurst: float, t: float) -> float:
    """(σ²)'(t) = e^{−t}(t^{2H}+Γ(2H+1,t)) − e^{−2t}(t^{2H}+Γ*(2H+1,t)) for fBm with δ(t)=t."""
    a = 2.0 * hurst + 1.0
    t2h = t ** (2.0 * hurst)
    return math.exp(-t) * (t2h + inc_gamma_lower(a, t)) - math.exp(-2.0 * t) * (t2h + inc_gamma_star(a, t))


def example1_rate(hurst: float, s_horizon: float) -> float:
    """σ'(S)/σ³(S) for fBm with δ(t)=t, from the closed forms."""
    var = 0.5 * example1_display(hurst, s_horizon)
    return example1_derivative(hurst, s_horizon) / (2.0 * var * var)


@lru_cache(maxsize=None)
def _example2_moment(k: int) -> float:
    """m_k = ∫₀¹ (1+z)^{k−2} √z dz."""
    value, abserr = integrate.quad(
        lambda z: (1.0 + z) ** (k - 2) * math.sqrt(z), 0.0, 1.0,
        epsabs=0.0, epsrel=1e-12, limit=QUAD_LIMIT,
    )
    if abserr > 1e-10 * max(1.0, value):
        raise QuadratureError(f"moment m_{k} did not converge", value, abserr)
    return value


def _example2_term(k: int, t: float) -> float:
    # 2(k−1)/k! · t^k computed in log space to avoid overflow for large k
    log_coef = math.log(2.0 * (k - 1)) - math.lgamma(k + 1) + k * math.log(t)
    return (-1.0) ** k * math.exp(log_coef) * _example2_moment(k)


def example2_series(t: float, k_max: int | None = None) -> float:
    """
    σ²(t) = ⅔t² + Σ_{k≥3} (−1)^k (2(k−1)/k!) t^k m_k for Z(t)=B(t)/√t, δ(t)=t.

    Only certified on [0, EXAMPLE2_MAX_T]. Without k_max, terms are summed
    until the first omitted one is below EXAMPLE2_TAIL_TOL.
    """
    if not 0.0 <= t <= EXAMPLE2_MAX_T:
        raise DomainError(f"example2 series is only validated for t in [0, {EXAMPLE2_MAX_T}], got {t}")
    if t == 0:
        return 0.0
    total = 2.0 / 3.0 * t * t
    k = 3
    while True:
        if k_max is not None and k > k_max:
            return total
        term = _example2_term(k, t)
        if k_max is None and abs(term) < EXAMPLE2_TAIL_TOL and k > 2.0 * t:
            return total
        total += term
        k += 1
        if k > SERIES_MAX_TERMS:
            raise NumericalError(f"example2 series did not reach tail tolerance at t={t}")


def example2_integral(t: float) -> float:
    """
    σ²(t) for Z(t)=B(t)/√t, δ(t)=t via the one-dimensional form
    2∫₀¹ √z(1−e^{−t(1+z)})/(1+z)² dz − 2∫₀¹ t√z e^{−t(1+z)}/(1+z) dz, valid for all t ≥ 0.
    """
    if t < 0:
        raise DomainError(f"t must be >= 0, got {t}")
    if t == 0:
        return 0.0

    def integrand(z: float) -> float:
        b = 1.0 + z
        return math.sqrt(z) * (-math.expm1(-t * b) / (b * b) - t * math.exp(-t * b) / b)

    return 2.0 * _quad_1d(integrand, 0.0, 1.0, "example2 integral")


def example2_derivative(t: float) -> float:
    """(σ²)'(t) = 2 t^{−1/2} e^{−t} Γ(3/2, t) for Z(t)=B(t)/√t, δ(t)=t."""
    return 2.0 * math.exp(-t) * inc_gamma_lower(1.5, t) / math.sqrt(t)


def example2_rate(s_horizon: float) -> float:
    var = example2_integral(s_horizon)
    return example2_derivative(s_horizon) / (2.0 * var * var)


# ─── Quadrature helpers ─────────────────────────────────────

def _quad_1d(func, a: float, b: float, what: str, points=None) -> float:
    value, abserr = integrate.quad(
        func, a, b, epsabs=QUAD_EPSABS_1D, epsrel=QUAD_EPSREL_1D, limit=QUAD_LIMIT, points=points
    )
    _check_quadrature(what, value, abserr)
    return value


def _check_quadrature(what: str, value: float, abserr: float) -> None:
    if not math.isfinite(value) or abserr > QUAD_FAILURE_TOL * max(1.0, abs(value)):
        raise QuadratureError(f"{what} did not converge", value, abserr)


def _interior_points(model: VarianceModel, t: float):
    pts = [x for x in model.discount.breakpoints if 0 < x < t]
    return pts or None


def _sigma2_quadrature(model: VarianceModel, t: float) -> float:
    kernel, discount = model.kernel, model.discount
    scaled = kernel.family is KernelFamily.SCALED_BM

    def integrand(w: float, v: float) -> float:
        weight = math.exp(-discount.delta(w) - discount.delta(v))
        if scaled:
            # √(w/v) on w ≤ v, bounded up to the corner
            return weight * (math.sqrt(w / v) if v > 0 else 1.0)
        return weight * cov(kernel, w, v)

    value, abserr = integrate.dblquad(
        integrand, 0.0, t, lambda v: 0.0, lambda v: v,
        epsabs=QUAD_EPSABS_2D, epsrel=QUAD_EPSREL_2D,
    )
    _check_quadrature(f"sigma2({kernel.label}, {discount.label}, t={t})", value, abserr)
    return 2.0 * value


def _sigma2_closed(model: VarianceModel, t: float) -> float | None:
    """Closed form when one is known for this kernel/discount pair, else None."""
    hurst = model.hurst
    discount = model.discount
    if hurst is not None:
        if model.has_unit_linear_discount:
            return 0.5 * example1_display(hurst, t)
        if discount.kind is DiscountKind.CONSTANT:
            p = 2.0 * hurst + 2.0
            return math.exp(-2.0 * discount.d) * t**p / p
    if model.kernel.family is KernelFamily.SCALED_BM and model.has_unit_linear_discount:
        return example2_integral(t)
    return None


def _sigma2_derivative_closed(model: VarianceModel, t: float) -> float | None:
    hurst = model.hurst
    discount = model.discount
    if hurst is not None:
        if model.has_unit_linear_discount:
            return example1_derivative(hurst, t)
        if discount.kind is DiscountKind.CONSTANT:
            return math.exp(-2.0 * discount.d) * t ** (2.0 * hurst + 1.0)
    if model.kernel.family is KernelFamily.SCALED_BM and model.has_unit_linear_discount:
        return example2_derivative(t)
    return None


# ─── Public operations ──────────────────────────────────────

def _check_method(method: str) -> None:
    if method not in METHODS:
        raise DomainError(f"method must be one of {METHODS}, got {method!r}")


def closed_form_available(model: VarianceModel) -> bool:
    return _sigma2_closed(model, 1.0) is not None


def sigma2(model: VarianceModel, t: float, method: str = "auto") -> float:
    """
    σ²(t) = 2∫₀ᵗ∫₀ᵛ e^{−δ(w)−δ(v)} R(w,v) dw dv.

    method="auto" uses a closed form when one is known and falls back to
    adaptive quadrature over the triangle 0 ≤ w ≤ v ≤ t.
    """
    _check_method(method)
    if t < 0:
        raise DomainError(f"sigma2 needs t >= 0, got {t}")
    if t == 0:
        return 0.0

    def compute() -> float:
        if method != "quadrature":
            closed = _sigma2_closed(model, t)
            if closed is not None:
                return closed
            if method == "closed":
                raise DomainError(
                    f"no closed form for {model.kernel.label} with {model.discount.label}"
                )
        return _sigma2_quadrature(model, t)

    return model.cached(("sigma2", method, t), compute)


def sigma2_derivative(model: VarianceModel, t: float, method: str = "auto") -> float:
    """(σ²)'(t) = 2∫₀ᵗ e^{−δ(s)−δ(t)} R(s,t) ds (> 0 under assumption A1)."""
    _check_method(method)
    if not t > 0:
        raise DomainError(f"sigma2_derivative needs t > 0, got {t}")

    def compute() -> float:
        if method != "quadrature":
            closed = _sigma2_derivative_closed(model, t)
            if closed is not None:
                return closed
            if method == "closed":
                raise DomainError(
                    f"no closed form for {model.kernel.label} with {model.discount.label}"
                )
        kernel, discount = model.kernel, model.discount
        dt = discount.delta(t)

        def integrand(s: float) -> float:
            if kernel.requires_positive_time:
                return math.exp(-discount.delta(s) - dt) * math.sqrt(s / t)
            return math.exp(-discount.delta(s) - dt) * cov(kernel, s, t)

        return 2.0 * _quad_1d(integrand, 0.0, t, f"sigma2' at t={t}", points=_interior_points(model, t))

    value = model.cached(("dsigma2", method, t), compute)
    if not value > 0:
        raise NumericalError(f"(sigma2)'({t}) = {value} is not positive")
    return value


def g_u(model: VarianceModel, c: float, u: float, t: float) -> float:
    """Normalized barrier (u + c·δ̃(t)) / σ(t)."""
    if not t > 0:
        raise DomainError(f"g_u needs t > 0, got {t}")
    if u < 0 or c < 0:
        raise DomainError(f"g_u needs u >= 0 and c >= 0, got u={u}, c={c}")
    var = sigma2(model, t)
    if not var > 0:
        raise NumericalError(f"sigma2({t}) = {var}; g_u is undefined")
    return (u + c * delta_tilde(model.discount, t)) / math.sqrt(var)


def ruin_time_rate(model: VarianceModel, s_horizon: float) -> float:
    """σ'(S)/σ³(S) = (σ²)'(S) / (2·(σ²(S))²)."""
    var = sigma2(model, s_horizon)
    return sigma2_derivative(model, s_horizon) / (2.0 * var * var)
