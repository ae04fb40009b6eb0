"""Flow evolutions and exact Birkhoff-average engines.

Averages for the suspension flow over the odometer are computed the way the
uniform-rate argument splits them: a head integral up to the roof, full
columns (which vanish because every column profile has zero integral), and a
tail integral at the iterated base point.  Cost is therefore independent of t.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .core import CertifiedValue, Dyadic, PiecewiseConst, RatLike, pw_integrate, rat
from .errors import BoundViolated, TruncationTooDeep
from .odometer import (
    SquarePoint,
    TowerCoords,
    lsb_int,
    odometer_pow,
    tower_coords,
)

__all__ = [
    "circle_evolve",
    "odometer_flow_evolve",
    "birkhoff_avg_rotation",
    "TowerFunction",
    "SeriesFunction",
    "term_integral",
    "birkhoff_avg_tower_exact",
    "PeriodicBoundReport",
    "periodic_bound_check",
]


def circle_evolve(x: RatLike, t: RatLike) -> Fraction:
    """Rotation flow ``{x + t}``."""
    s = rat(x) + rat(t)
    return s - (s // 1)


def odometer_flow_evolve(p: SquarePoint, t: RatLike) -> SquarePoint:
    """Suspension flow over the odometer with roof 1."""
    t = rat(t)
    if t < 0:
        raise ValueError("flow time must be non-negative")
    s = p.y + t
    k = int(s // 1)
    return SquarePoint(odometer_pow(p.x, k), s - k)


def birkhoff_avg_rotation(f: PiecewiseConst, t: RatLike, x: RatLike) -> Fraction:
    t = rat(t)
    if t <= 0:
        raise ValueError("averaging time must be positive")
    if f.period != 1:
        raise ValueError("rotation averages need a period-1 function")
    x = rat(x)
    return pw_integrate(f, x, x + t) / t


@dataclass(frozen=True)
class TowerFunction:
    """A function on ``M_n`` given column-wise.

    ``pieces`` is a list of ``(x_lo, x_hi, profile)`` whose x-intervals tile
    the tower base ``[0, 2**-level)``; each profile is a step function of
    ``y_n`` with period ``2**level`` and zero integral over a column.
    """

    level: int
    pieces: tuple[tuple[Fraction, Fraction, PiecewiseConst], ...]

    def __post_init__(self):
        height = Fraction(1 << self.level)
        width = Fraction(1, 1 << self.level)
        pieces = tuple((rat(lo), rat(hi), prof) for lo, hi, prof in self.pieces)
        if not pieces or pieces[0][0] != 0 or pieces[-1][1] != width:
            raise ValueError("x-pieces must tile [0, 2^-level)")
        for (_, hi, _), (lo, _, _) in zip(pieces, pieces[1:]):
            if hi != lo:
                raise ValueError("x-pieces must be contiguous")
        for lo, hi, prof in pieces:
            if hi <= lo:
                raise ValueError("empty x-piece")
            if prof.period != height:
                raise ValueError(f"profile period {prof.period} != column height {height}")
            if prof.total != 0:
                raise ValueError("column profile must integrate to zero")
        object.__setattr__(self, "pieces", pieces)

    @classmethod
    def uniform(cls, level: int, profile: PiecewiseConst) -> "TowerFunction":
        return cls(level, ((Fraction(0), Fraction(1, 1 << level), profile),))

    @property
    def height(self) -> int:
        return 1 << self.level

    @property
    def x_dependent(self) -> bool:
        return len(self.pieces) > 1

    def profile_at(self, x_n: Dyadic) -> PiecewiseConst:
        if len(self.pieces) == 1:
            return self.pieces[0][2]
        xf = x_n.to_fraction()
        for lo, hi, prof in self.pieces:
            if lo <= xf < hi:
                return prof
        raise ValueError(f"{x_n} outside the tower base")

    @property
    def sup_norm(self) -> Fraction:
        return max(prof.sup_abs for _, _, prof in self.pieces)

    @property
    def infty1_norm(self) -> Fraction:
        """Sup over base points of the column L1 norm."""
        return max(prof.abs_integral for _, _, prof in self.pieces)

    def __call__(self, p: SquarePoint) -> Fraction:
        tc = tower_coords(p, self.level)
        return self.profile_at(tc.x_n)(tc.y_n)


@dataclass(frozen=True)
class SeriesFunction:
    """Finite prefix of ``sum_n f_n(x_n, y_n)`` plus bounds on the remainder.

    ``beyond_sup`` bounds ``sum of sup|f_m|`` over terms past the stored
    prefix, ``beyond_infty1`` bounds the sum of their column norms (``None``
    when that series diverges).
    """

    terms: tuple[TowerFunction, ...]
    beyond_sup: Fraction = Fraction(0)
    beyond_infty1: Fraction | None = Fraction(0)
    _sup_suffix: tuple[Fraction, ...] = field(init=False, repr=False, compare=False)
    _inf1_suffix: tuple[Fraction, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        terms = tuple(self.terms)
        levels = [t.level for t in terms]
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise ValueError("term levels must strictly increase")
        sup = [Fraction(0)] * (len(terms) + 1)
        inf1 = [Fraction(0)] * (len(terms) + 1)
        for i in range(len(terms) - 1, -1, -1):
            sup[i] = sup[i + 1] + terms[i].sup_norm
            inf1[i] = inf1[i + 1] + terms[i].infty1_norm
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "beyond_sup", rat(self.beyond_sup))
        if self.beyond_infty1 is not None:
            object.__setattr__(self, "beyond_infty1", rat(self.beyond_infty1))
        object.__setattr__(self, "_sup_suffix", tuple(sup))
        object.__setattr__(self, "_inf1_suffix", tuple(inf1))

    def __len__(self) -> int:
        return len(self.terms)

    def tail_bound(self, N: int) -> Fraction:
        """Bound on ``sum_{m>N} sup|f_m|`` (terms counted from 1)."""
        return self._sup_suffix[min(N, len(self.terms))] + self.beyond_sup

    def infty1_tail(self, N: int) -> Fraction | None:
        if self.beyond_infty1 is None:
            return None
        return self._inf1_suffix[min(N, len(self.terms))] + self.beyond_infty1

    def infty1_total(self) -> Fraction | None:
        return self.infty1_tail(0)


def term_integral(term: TowerFunction, t: Fraction, tc: TowerCoords) -> Fraction:
    """``∫_0^t f_n(T_s p) ds`` for one tower term, by head/columns/tail."""
    H = term.height
    y = tc.y_n
    prof = term.profile_at(tc.x_n)
    if y + t <= H:
        return prof.integrate(y, y + t)
    if not term.x_dependent:
        # zero column integrals make the periodic integral equal head + tail
        return prof.integrate(y, y + t)
    head = prof.integrate(y, H)
    rest = t - (H - y)
    k = int(rest // H)
    tail_len = rest - k * H
    if tail_len == 0:
        return head
    x_tail = odometer_pow(tc.x_n, (k + 1) * H)
    return head + term.profile_at(x_tail).integrate(0, tail_len)


def birkhoff_avg_tower_exact(
    f: SeriesFunction, t: RatLike, p: SquarePoint, trunc: int | None = None
) -> CertifiedValue:
    """Certified ``A(f, t, p)``: exact over ``trunc`` terms, bounded beyond."""
    t = rat(t)
    if t <= 0:
        raise ValueError("averaging time must be positive")
    if trunc is None:
        trunc = len(f.terms)
    if trunc > len(f.terms):
        raise TruncationTooDeep(f"trunc={trunc} but only {len(f.terms)} terms are stored")
    J = lsb_int(p.x)
    total = Fraction(0)
    for term in f.terms[:trunc]:
        n = term.level
        j = J & ((1 << n) - 1)
        if term.x_dependent:
            tc = TowerCoords(n, odometer_pow(p.x, -j), p.y + j)
        else:
            tc = _FastCoords(p.y + j)
        total += term_integral(term, t, tc)
    tail = f.tail_bound(trunc)
    inf1 = f.infty1_tail(trunc)
    if inf1 is not None:
        tail = min(tail, 2 * inf1 / t)
    return CertifiedValue(total / t, tail)


class _FastCoords:
    """Stand-in for TowerCoords when the term does not look at x_n."""

    __slots__ = ("y_n",)
    x_n = Dyadic(0)

    def __init__(self, y_n: Fraction):
        self.y_n = y_n


@dataclass(frozen=True)
class PeriodicBoundReport:
    lhs: Fraction
    rhs: Fraction

    @property
    def ok(self) -> bool:
        return self.lhs <= self.rhs


def periodic_bound_check(f: PiecewiseConst, t: RatLike, x: RatLike) -> PeriodicBoundReport:
    """``|A - orbit mean| <= (2/t) ∫_0^P |f(T_s x)| ds`` for the rotation (P = 1)."""
    t = rat(t)
    avg = birkhoff_avg_rotation(f, t, x)
    lhs = abs(avg - f.mean)
    rhs = 2 * f.abs_integral / t
    report = PeriodicBoundReport(lhs, rhs)
    if not report.ok:
        raise BoundViolated("periodic-orbit bound failed", witness=(t, x, lhs, rhs))
    return report


def series_average_many(
    f: SeriesFunction, t: Fraction, points: Sequence[SquarePoint], trunc: int | None = None
) -> list[CertifiedValue]:
    return [birkhoff_avg_tower_exact(f, t, p, trunc) for p in points]
