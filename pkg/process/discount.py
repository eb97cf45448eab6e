"""
Discount-rate functions δ(·) and the integrated discount δ̃(t) = ∫₀ᵗ e^{−δ(s)} ds.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import integrate

from config import QUAD_EPSABS_1D, QUAD_LIMIT
from errors import DomainError, QuadratureError

logger = logging.getLogger(__name__)

DELTA_TILDE_EPSREL = 1e-10


class DiscountKind(str, Enum):
    CONSTANT = "constant"
    LINEAR = "linear"
    TABLE = "table"


@dataclass(frozen=True)
class DiscountSpec:
    """
    δ(t) = d (CONSTANT), rate·t (LINEAR), or piecewise-linear through
    (times, values) with constant extrapolation (TABLE).
    """

    kind: DiscountKind
    d: float = 0.0
    rate: float = 0.0
    times: tuple[float, ...] = field(default_factory=tuple)
    values: tuple[float, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.kind is DiscountKind.TABLE:
            if len(self.times) == 0 or len(self.times) != len(self.values):
                raise DomainError("table discount needs equally long, non-empty times and values")
            if any(b <= a for a, b in zip(self.times, self.times[1:])):
                raise DomainError("table discount times must be strictly increasing")
        finite = [self.d, self.rate, *self.times, *self.values]
        if not all(math.isfinite(x) for x in finite):
            raise DomainError("discount parameters must be finite")

    @classmethod
    def constant(cls, d: float = 0.0) -> DiscountSpec:
        return cls(DiscountKind.CONSTANT, d=float(d))

    @classmethod
    def linear(cls, rate: float = 1.0) -> DiscountSpec:
        return cls(DiscountKind.LINEAR, rate=float(rate))

    @classmethod
    def table(cls, times, values) -> DiscountSpec:
        return cls(
            DiscountKind.TABLE,
            times=tuple(float(x) for x in times),
            values=tuple(float(x) for x in values),
        )

    @classmethod
    def from_dict(cls, spec: dict) -> DiscountSpec:
        """Config object: {"kind": "constant", "d": ..} | {"kind": "linear", "rate": ..} | {"kind": "table", "times": [..], "values": [..]}."""
        if not isinstance(spec, dict) or "kind" not in spec:
            raise DomainError(f"discount spec must be an object with a 'kind' key, got {spec!r}")
        try:
            kind = DiscountKind(str(spec["kind"]).lower())
        except ValueError:
            raise DomainError(f"unknown discount kind {spec['kind']!r}") from None
        allowed = {
            DiscountKind.CONSTANT: {"kind", "d"},
            DiscountKind.LINEAR: {"kind", "rate"},
            DiscountKind.TABLE: {"kind", "times", "values"},
        }[kind]
        unknown = set(spec) - allowed
        if unknown:
            raise DomainError(f"unknown fields for {kind.value} discount: {sorted(unknown)}")
        if kind is DiscountKind.CONSTANT:
            return cls.constant(spec.get("d", 0.0))
        if kind is DiscountKind.LINEAR:
            return cls.linear(spec.get("rate", 1.0))
        return cls.table(spec.get("times", []), spec.get("values", []))

    def to_dict(self) -> dict:
        if self.kind is DiscountKind.CONSTANT:
            return {"kind": "constant", "d": self.d}
        if self.kind is DiscountKind.LINEAR:
            return {"kind": "linear", "rate": self.rate}
        return {"kind": "table", "times": list(self.times), "values": list(self.values)}

    @property
    def label(self) -> str:
        if self.kind is DiscountKind.CONSTANT:
            return f"constant(d={self.d:g})"
        if self.kind is DiscountKind.LINEAR:
            return f"linear(rate={self.rate:g})"
        return f"table({len(self.times)} knots)"

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return self.times if self.kind is DiscountKind.TABLE else ()

    def delta(self, t):
        """δ(t), vectorized."""
        t_arr = np.asarray(t, dtype=float)
        if self.kind is DiscountKind.CONSTANT:
            out = np.full_like(t_arr, self.d)
        elif self.kind is DiscountKind.LINEAR:
            out = self.rate * t_arr
        else:
            out = np.interp(t_arr, self.times, self.values)
        return float(out) if out.ndim == 0 else out

    def factor(self, t):
        """e^{−δ(t)}, vectorized."""
        out = np.exp(-np.asarray(self.delta(t), dtype=float))
        return float(out) if out.ndim == 0 else out


def delta_tilde(discount: DiscountSpec, t: float) -> float:
    """∫₀ᵗ e^{−δ(s)} ds; closed form for CONSTANT and LINEAR, adaptive quadrature otherwise."""
    if t < 0:
        raise DomainError(f"delta_tilde needs t >= 0, got {t}")
    if t == 0:
        return 0.0

    if discount.kind is DiscountKind.CONSTANT:
        d = discount.d
        return t if d == 0 else -math.expm1(-d * t) / d
    if discount.kind is DiscountKind.LINEAR:
        rate = discount.rate
        return t if rate == 0 else -math.expm1(-rate * t) / rate

    points = [x for x in discount.breakpoints if 0 < x < t] or None
    value, abserr = integrate.quad(
        discount.factor, 0.0, t,
        epsabs=QUAD_EPSABS_1D, epsrel=DELTA_TILDE_EPSREL, limit=QUAD_LIMIT, points=points,
    )
    if abserr > max(QUAD_EPSABS_1D, DELTA_TILDE_EPSREL * abs(value)) * 100:
        raise QuadratureError("delta_tilde quadrature did not converge", value, abserr)
    return value


def delta_tilde_nodes(discount: DiscountSpec, times) -> np.ndarray:
    """δ̃ evaluated at each node of an increasing grid."""
    times = np.asarray(times, dtype=float)
    if discount.kind is not DiscountKind.TABLE:
        return np.array([delta_tilde(discount, float(x)) for x in times])
    # accumulate segment integrals so the table quadrature runs once per segment
    out = np.empty_like(times)
    acc = delta_tilde(discount, float(times[0]))
    out[0] = acc
    for i in range(1, times.size):
        a, b = float(times[i - 1]), float(times[i])
        points = [x for x in discount.breakpoints if a < x < b] or None
        seg, _ = integrate.quad(discount.factor, a, b, epsabs=QUAD_EPSABS_1D,
                                epsrel=DELTA_TILDE_EPSREL, limit=QUAD_LIMIT, points=points)
        acc += seg
        out[i] = acc
    return out
