"""Prescribed rate functions phi(t) -> 0.

Comparisons are done on ``log2`` values: the stage times involved are huge
powers of two, and ``math.log2`` handles big integers exactly enough for the
order-of-magnitude growth claims made with them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .core import fmt_rat, rat
from .errors import ConfigInvalid


def log2_rat(x: Fraction) -> float:
    x = rat(x)
    if x <= 0:
        raise ValueError("log of a non-positive number")
    return math.log2(x.numerator) - math.log2(x.denominator)


@dataclass(frozen=True)
class PhiSpec:
    """``power``: ``t**exponent`` (exponent < 0); ``log-reciprocal``: ``1/log_base t``."""

    kind: str
    exponent: Fraction = Fraction(-1, 4)
    base: int = 2

    def __post_init__(self):
        if self.kind == "power":
            if rat(self.exponent) >= 0:
                raise ConfigInvalid("power rate needs a negative exponent")
            object.__setattr__(self, "exponent", rat(self.exponent))
        elif self.kind == "log-reciprocal":
            if self.base < 2:
                raise ConfigInvalid("log base must be at least 2")
        else:
            raise ConfigInvalid(f"unknown phi kind {self.kind!r}")

    @classmethod
    def power(cls, exponent="-1/4") -> "PhiSpec":
        return cls("power", rat(exponent))

    @classmethod
    def log_reciprocal(cls, base: int = 2) -> "PhiSpec":
        return cls("log-reciprocal", base=base)

    @classmethod
    def from_json(cls, obj: dict) -> "PhiSpec":
        kind = obj.get("kind")
        if kind == "power":
            return cls.power(obj.get("exponent", "-1/4"))
        if kind == "log-reciprocal":
            return cls.log_reciprocal(int(obj.get("base", 2)))
        raise ConfigInvalid(f"unknown phi kind {kind!r}")

    def to_json(self) -> dict:
        if self.kind == "power":
            return {"kind": "power", "exponent": fmt_rat(self.exponent)}
        return {"kind": "log-reciprocal", "base": self.base}

    def domain_min(self) -> Fraction:
        """Smallest t for which phi is positive and decreasing."""
        return Fraction(0) if self.kind == "power" else Fraction(self.base)

    def log2(self, t) -> float:
        lt = log2_rat(rat(t)) if not isinstance(t, float) else math.log2(t)
        if self.kind == "power":
            return float(self.exponent) * lt
        ln_base = math.log2(self.base)
        inner = lt / ln_base
        if inner <= 0:
            raise ValueError(f"phi undefined at t = {t}")
        return -math.log2(inner)

    def __call__(self, t) -> float:
        return 2.0 ** self.log2(t)
