"""
Window rules u ↦ T_u for the Parisian delay.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from errors import DomainError


class WindowMode(str, Enum):
    FIXED = "fixed"
    C_OVER_U = "c_over_u"
    POWER = "power"


@dataclass(frozen=True)
class WindowRule:
    """T_u = value (FIXED), t_const/u (C_OVER_U) or a·u^{−p} with p > 1 (POWER)."""

    mode: WindowMode
    value: float = 0.0
    t_const: float = 1.0
    a: float = 1.0
    p: float = 2.0

    def __post_init__(self):
        if self.mode is WindowMode.FIXED and self.value < 0:
            raise DomainError(f"fixed window must be >= 0, got {self.value}")
        if self.mode is WindowMode.C_OVER_U and not self.t_const > 0:
            raise DomainError(f"c_over_u window needs t_const > 0, got {self.t_const}")
        if self.mode is WindowMode.POWER and not (self.a > 0 and self.p > 1):
            raise DomainError(f"power window needs a > 0 and p > 1, got a={self.a}, p={self.p}")

    @classmethod
    def fixed(cls, value: float) -> WindowRule:
        return cls(WindowMode.FIXED, value=float(value))

    @classmethod
    def c_over_u(cls, t_const: float) -> WindowRule:
        return cls(WindowMode.C_OVER_U, t_const=float(t_const))

    @classmethod
    def power(cls, a: float, p: float) -> WindowRule:
        return cls(WindowMode.POWER, a=float(a), p=float(p))

    @classmethod
    def from_dict(cls, spec: dict) -> WindowRule:
        if not isinstance(spec, dict) or "mode" not in spec:
            raise DomainError(f"window spec must be an object with a 'mode' key, got {spec!r}")
        try:
            mode = WindowMode(str(spec["mode"]).lower())
        except ValueError:
            raise DomainError(f"unknown window mode {spec['mode']!r}") from None
        allowed = {
            WindowMode.FIXED: {"mode", "value"},
            WindowMode.C_OVER_U: {"mode", "t_const"},
            WindowMode.POWER: {"mode", "a", "p"},
        }[mode]
        unknown = set(spec) - allowed
        if unknown:
            raise DomainError(f"unknown fields for {mode.value} window: {sorted(unknown)}")
        if mode is WindowMode.FIXED:
            return cls.fixed(spec.get("value", 0.0))
        if mode is WindowMode.C_OVER_U:
            return cls.c_over_u(spec.get("t_const", 1.0))
        return cls.power(spec.get("a", 1.0), spec.get("p", 2.0))

    def to_dict(self) -> dict:
        if self.mode is WindowMode.FIXED:
            return {"mode": "fixed", "value": self.value}
        if self.mode is WindowMode.C_OVER_U:
            return {"mode": "c_over_u", "t_const": self.t_const}
        return {"mode": "power", "a": self.a, "p": self.p}

    def t_window(self, u: float) -> float:
        if self.mode is WindowMode.FIXED:
            return self.value
        if not u > 0:
            raise DomainError(f"{self.mode.value} window needs u > 0, got {u}")
        if self.mode is WindowMode.C_OVER_U:
            return self.t_const / u
        return self.a * u ** (-self.p)
