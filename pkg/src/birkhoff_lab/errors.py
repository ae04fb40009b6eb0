"""Exception hierarchy shared by every module of the lab."""

from __future__ import annotations

from typing import Any


class BirkhoffLabError(Exception):
    """Base class for all errors raised by birkhoff_lab."""


class NotDyadic(BirkhoffLabError, ValueError):
    """A rational with a non power-of-two denominator was coerced to Dyadic."""


class NegativeOrbitUnderflow(BirkhoffLabError, ValueError):
    """A backward odometer orbit would need an infinite tail of ones."""


class TruncationTooDeep(BirkhoffLabError, ValueError):
    """Series truncation asked for more terms than are stored."""


class ToleranceNotMet(BirkhoffLabError, ArithmeticError):
    """Adaptive quadrature could not reach the requested tolerance."""


class PrecisionExhausted(BirkhoffLabError, ArithmeticError):
    """The configured working precision cannot resolve the requested stage."""


class PhiTooSlow(BirkhoffLabError, ValueError):
    """The rate function decays too slowly for the configured exponent cap."""


class DegenerateFit(BirkhoffLabError, ValueError):
    """A log-log fit was requested on data containing zeros or too few rows."""

    def __init__(self, message: str, excluded: list[int] | None = None):
        super().__init__(message)
        self.excluded = excluded or []


class ConfigInvalid(BirkhoffLabError, ValueError):
    """An experiment configuration or schedule failed validation."""


class BoundViolated(BirkhoffLabError, AssertionError):
    """A certified quantity exceeded the bound it is supposed to satisfy."""

    def __init__(self, message: str, witness: Any = None):
        super().__init__(message)
        self.witness = witness
