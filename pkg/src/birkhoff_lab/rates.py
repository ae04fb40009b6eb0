"""Rate reports and log-log slope fitting."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .core import fmt_rat
from .errors import DegenerateFit

__all__ = ["RateRow", "RateReport", "Fit", "rate_fit"]


@dataclass(frozen=True)
class Fit:
    slope: float
    stderr: float
    intercept: float
    excluded: tuple[int, ...] = ()


def rate_fit(rows: Sequence[tuple[float, float]]) -> Fit:
    """Least-squares line through ``(log t, log sup|A|)``.

    Rows with a zero value cannot be placed on a log scale; they raise
    :class:`DegenerateFit` listing the offending row indices.
    """
    excluded = [i for i, (_, v) in enumerate(rows) if v <= 0]
    if excluded:
        raise DegenerateFit(f"{len(excluded)} rows have non-positive values", excluded)
    if len(rows) < 3:
        raise DegenerateFit("need at least 3 rows for a fit")
    x = np.array([math.log(float(t)) for t, _ in rows])
    y = np.array([math.log(float(v)) for _, v in rows])
    xm = x - x.mean()
    sxx = float(xm @ xm)
    if sxx == 0:
        raise DegenerateFit("all t values coincide")
    slope = float(xm @ (y - y.mean())) / sxx
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (intercept + slope * x)
    dof = len(rows) - 2
    stderr = math.sqrt(float(resid @ resid) / dof / sxx) if dof > 0 else 0.0
    return Fit(slope, stderr, intercept)


@dataclass(frozen=True)
class RateRow:
    """One sweep index. ``sup_abs`` is the certified sup of |A|; ``sup_exact``
    the sup of the exactly computed (truncated) part. ``ratio`` divides
    ``sup_abs`` by ``scale`` when given, else by the bound."""

    index: Fraction | int
    sup_abs: Fraction
    bound: Fraction
    points: int = 0
    scale: Fraction | None = None
    sup_exact: Fraction | None = None

    @property
    def ratio(self) -> float:
        den = self.bound if self.scale is None else self.scale
        if den == 0:
            return math.inf if self.sup_abs else 0.0
        return float(Fraction(self.sup_abs) / Fraction(den))

    @property
    def ok(self) -> bool:
        return self.sup_abs <= self.bound


@dataclass
class RateReport:
    """Per-index sup of certified |A| against the theoretical bound."""

    index_name: str
    rows: list[RateRow] = field(default_factory=list)
    fit: Fit | None = None
    asserts_bound: bool = True

    @property
    def violations(self) -> list[RateRow]:
        return [r for r in self.rows if not r.ok] if self.asserts_bound else []

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([self.index_name, "sup_abs_num", "sup_abs_den", "bound_num", "bound_den", "ratio_float"])
        for r in self.rows:
            sup = Fraction(r.sup_abs)
            bound = Fraction(r.bound)
            idx = fmt_rat(r.index) if isinstance(r.index, Fraction) else str(r.index)
            w.writerow([idx, sup.numerator, sup.denominator, bound.numerator, bound.denominator, repr(r.ratio)])
        return buf.getvalue()
