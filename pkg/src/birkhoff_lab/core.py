"""Exact scalars and periodic piecewise functions.

Everything here is exact: rationals are :class:`fractions.Fraction`, binary
rationals are :class:`Dyadic`.  The piecewise classes integrate in closed
form, so inequalities about averages become decidable comparisons.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from fractions import Fraction
from functools import total_ordering
from typing import Iterable, Iterator, Sequence, Union

from .errors import NotDyadic

Rat = Fraction
RatLike = Union[int, str, Fraction, "Dyadic"]

__all__ = [
    "Rat",
    "Dyadic",
    "PiecewiseConst",
    "PiecewiseLinear",
    "CertifiedValue",
    "rat",
    "fmt_rat",
    "pw_integrate",
    "window_average_profile",
    "level_set_measures",
]


def rat(x: RatLike) -> Fraction:
    """Coerce ints, ``"p/q"`` strings, Dyadics and Fractions to a Fraction.

    Floats are refused on purpose: they would silently smuggle rounding into
    an exact computation.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("bool is not a rational")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, Dyadic):
        return x.to_fraction()
    if isinstance(x, str):
        s = x.strip()
        if "^" in s:
            return Dyadic.parse(s).to_fraction()
        return Fraction(s)
    raise TypeError(f"cannot convert {type(x).__name__} to an exact rational")


def fmt_rat(x: Fraction) -> str:
    """Serialize as ``"num/den"`` (denominator always written)."""
    x = rat(x)
    return f"{x.numerator}/{x.denominator}"


@total_ordering
@dataclass(frozen=True)
class Dyadic:
    """Binary rational ``num / 2**exp`` kept in canonical form.

    Canonical means ``num`` odd, or ``num == 0 and exp == 0``.  Negative
    exponents are folded into ``num`` so the stored ``exp`` is never negative.
    """

    num: int
    exp: int = 0

    def __post_init__(self):
        num, exp = int(self.num), int(self.exp)
        if num == 0:
            exp = 0
        else:
            if exp < 0:
                num <<= -exp
                exp = 0
            tz = (num & -num).bit_length() - 1
            shift = min(tz, exp)
            num >>= shift
            exp -= shift
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "exp", exp)

    @classmethod
    def from_fraction(cls, x: RatLike) -> "Dyadic":
        if isinstance(x, Dyadic):
            return x
        x = rat(x)
        den = x.denominator
        if den & (den - 1):
            raise NotDyadic(f"{x} has a non-dyadic denominator")
        return cls(x.numerator, den.bit_length() - 1)

    @classmethod
    def parse(cls, s: str) -> "Dyadic":
        """Parse ``"num/2^exp"`` (or any dyadic ``"p/q"`` / integer string)."""
        s = s.strip()
        if "/2^" in s:
            num, exp = s.split("/2^")
            return cls(int(num), int(exp))
        return cls.from_fraction(Fraction(s))

    def __str__(self) -> str:
        return f"{self.num}/2^{self.exp}"

    def to_fraction(self) -> Fraction:
        return Fraction(self.num, 1 << self.exp)

    def __float__(self) -> float:
        return float(self.to_fraction())

    def _coerce(self, other) -> "Dyadic | None":
        if isinstance(other, Dyadic):
            return other
        if isinstance(other, int) and not isinstance(other, bool):
            return Dyadic(other, 0)
        return None

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        e = max(self.exp, o.exp)
        return Dyadic((self.num << (e - self.exp)) + (o.num << (e - o.exp)), e)

    __radd__ = __add__

    def __neg__(self) -> "Dyadic":
        return Dyadic(-self.num, self.exp)

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o - self

    def __mul__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return Dyadic(self.num * o.num, self.exp + o.exp)

    __rmul__ = __mul__

    def shift(self, k: int) -> "Dyadic":
        """Multiply by ``2**k`` (k may be negative)."""
        return Dyadic(self.num, self.exp - k)

    def __eq__(self, other) -> bool:
        if isinstance(other, Dyadic):
            return self.num == other.num and self.exp == other.exp
        if isinstance(other, (int, Fraction)) and not isinstance(other, bool):
            return self.to_fraction() == other
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self.to_fraction())

    def __lt__(self, other) -> bool:
        if isinstance(other, Dyadic):
            e = max(self.exp, other.exp)
            return (self.num << (e - self.exp)) < (other.num << (e - other.exp))
        if isinstance(other, (int, Fraction)) and not isinstance(other, bool):
            return self.to_fraction() < other
        return NotImplemented

    def digit(self, i: int) -> int:
        """Binary digit ``x_i`` (1-based) of a number in ``[0, 1)``."""
        if i < 1:
            raise ValueError("digits are indexed from 1")
        if i > self.exp:
            return 0
        return (self.num >> (self.exp - i)) & 1

    def digits(self) -> list[int]:
        """Digits ``x_1 .. x_exp`` of a number in ``[0, 1)``."""
        if self.exp == 0:
            return []
        return [int(ch) for ch in format(self.num, f"0{self.exp}b")]


@dataclass(frozen=True)
class CertifiedValue:
    """An exact partial value plus a tail bound.

    The true value lies in ``[exact - tail, exact + tail]``.
    """

    exact: Fraction
    tail: Fraction = Fraction(0)

    def __post_init__(self):
        if self.tail < 0:
            raise ValueError("tail bound must be non-negative")

    @property
    def lo(self) -> Fraction:
        return self.exact - self.tail

    @property
    def hi(self) -> Fraction:
        return self.exact + self.tail

    @property
    def abs_upper(self) -> Fraction:
        return abs(self.exact) + self.tail

    @property
    def abs_lower(self) -> Fraction:
        return max(Fraction(0), abs(self.exact) - self.tail)

    def contains(self, x) -> bool:
        return self.lo <= x <= self.hi


def _periodic_mod(x: Fraction, period: Fraction) -> Fraction:
    return x - (x // period) * period


@dataclass(frozen=True)
class PiecewiseConst:
    """Periodic right-continuous step function.

    ``breaks`` runs from 0 to ``period``; ``values[i]`` holds on
    ``[breaks[i], breaks[i+1])``.
    """

    period: Fraction
    breaks: tuple[Fraction, ...]
    values: tuple[Fraction, ...]
    _cum: tuple[Fraction, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        period = rat(self.period)
        breaks = tuple(rat(b) for b in self.breaks)
        values = tuple(rat(v) for v in self.values)
        if period <= 0:
            raise ValueError("period must be positive")
        if len(breaks) != len(values) + 1 or not values:
            raise ValueError("need len(breaks) == len(values) + 1 >= 2")
        if breaks[0] != 0 or breaks[-1] != period:
            raise ValueError("breaks must start at 0 and end at the period")
        if any(b1 <= b0 for b0, b1 in zip(breaks, breaks[1:])):
            raise ValueError("breaks must be strictly increasing")
        cum = [Fraction(0)]
        for b0, b1, v in zip(breaks, breaks[1:], values):
            cum.append(cum[-1] + v * (b1 - b0))
        object.__setattr__(self, "period", period)
        object.__setattr__(self, "breaks", breaks)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_cum", tuple(cum))

    @classmethod
    def from_pieces(cls, period: RatLike, pieces: Iterable[tuple[RatLike, RatLike, RatLike]]) -> "PiecewiseConst":
        """Build from ``(start, end, value)`` triples; gaps are filled with 0."""
        period = rat(period)
        cuts = {Fraction(0), period}
        spec = []
        for a, b, v in pieces:
            a, b, v = rat(a), rat(b), rat(v)
            if not 0 <= a < b <= period:
                raise ValueError(f"piece [{a}, {b}) outside [0, {period})")
            cuts.update((a, b))
            spec.append((a, b, v))
        breaks = sorted(cuts)
        values = []
        for b0 in breaks[:-1]:
            hits = [v for a, b, v in spec if a <= b0 < b]
            if len(hits) > 1:
                raise ValueError("overlapping pieces")
            values.append(hits[0] if hits else Fraction(0))
        return cls(period, tuple(breaks), tuple(values)).simplified()

    @classmethod
    def constant(cls, period: RatLike, value: RatLike = 0) -> "PiecewiseConst":
        period = rat(period)
        return cls(period, (Fraction(0), period), (rat(value),))

    def simplified(self) -> "PiecewiseConst":
        """Merge adjacent pieces carrying equal values."""
        breaks = [self.breaks[0]]
        values: list[Fraction] = []
        for b1, v in zip(self.breaks[1:], self.values):
            if values and values[-1] == v:
                breaks[-1] = b1
            else:
                values.append(v)
                breaks.append(b1)
        return PiecewiseConst(self.period, tuple(breaks), tuple(values))

    def __call__(self, x: RatLike) -> Fraction:
        r = _periodic_mod(rat(x), self.period)
        return self.values[bisect_right(self.breaks, r) - 1]

    @property
    def total(self) -> Fraction:
        """Integral over one full period."""
        return self._cum[-1]

    @property
    def mean(self) -> Fraction:
        return self.total / self.period

    @property
    def abs_integral(self) -> Fraction:
        return sum((abs(v) * (b1 - b0) for b0, b1, v in self.pieces()), Fraction(0))

    @property
    def sup_abs(self) -> Fraction:
        return max(abs(v) for v in self.values)

    @property
    def circular_variation(self) -> Fraction:
        """Total variation over one period of the circle (wrap jump included)."""
        vs = self.values
        return sum((abs(vs[i] - vs[i - 1]) for i in range(len(vs))), Fraction(0))

    def pieces(self) -> Iterator[tuple[Fraction, Fraction, Fraction]]:
        return zip(self.breaks, self.breaks[1:], self.values)

    def antiderivative(self, x: RatLike) -> Fraction:
        """``F(x) = ∫_0^x f`` for the periodic extension (any real x)."""
        x = rat(x)
        q = x // self.period
        r = x - q * self.period
        i = bisect_right(self.breaks, r) - 1
        if i == len(self.values):
            i -= 1
        return q * self.total + self._cum[i] + self.values[i] * (r - self.breaks[i])

    def integrate(self, a: RatLike, b: RatLike) -> Fraction:
        return pw_integrate(self, a, b)

    def __add__(self, other: "PiecewiseConst") -> "PiecewiseConst":
        if not isinstance(other, PiecewiseConst):
            return NotImplemented
        if other.period != self.period:
            raise ValueError("periods differ")
        breaks = sorted(set(self.breaks) | set(other.breaks))
        values = tuple(self(b) + other(b) for b in breaks[:-1])
        return PiecewiseConst(self.period, tuple(breaks), values).simplified()

    def scaled(self, k: RatLike) -> "PiecewiseConst":
        k = rat(k)
        return PiecewiseConst(self.period, self.breaks, tuple(k * v for v in self.values))

    def to_json(self) -> dict:
        return {
            "period": fmt_rat(self.period),
            "breaks": [fmt_rat(b) for b in self.breaks],
            "values": [fmt_rat(v) for v in self.values],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "PiecewiseConst":
        return cls(rat(obj["period"]), tuple(map(rat, obj["breaks"])), tuple(map(rat, obj["values"])))


def pw_integrate(f: PiecewiseConst, a: RatLike, b: RatLike) -> Fraction:
    """Exact integral of the periodic extension of ``f`` over ``[a, b)``."""
    a, b = rat(a), rat(b)
    if a > b:
        raise ValueError(f"need a <= b, got [{a}, {b})")
    return f.antiderivative(b) - f.antiderivative(a)


@dataclass(frozen=True)
class PiecewiseLinear:
    """Continuous periodic piecewise-affine function given by its nodes.

    Node positions lie in ``[0, period)``; the last node connects to the first
    one across the period boundary.
    """

    period: Fraction
    nodes: tuple[tuple[Fraction, Fraction], ...]

    def __post_init__(self):
        period = rat(self.period)
        nodes = tuple((rat(x), rat(v)) for x, v in self.nodes)
        if period <= 0 or not nodes:
            raise ValueError("need a positive period and at least one node")
        xs = [x for x, _ in nodes]
        if xs[0] < 0 or xs[-1] >= period or any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError("node positions must be strictly increasing in [0, period)")
        object.__setattr__(self, "period", period)
        object.__setattr__(self, "nodes", nodes)

    def segments(self) -> list[tuple[Fraction, Fraction, Fraction, Fraction]]:
        """Affine pieces ``(x0, x1, v0, v1)`` tiling exactly ``[0, period)``."""
        P = self.period
        ext = list(self.nodes)
        x_first, v_first = ext[0]
        x_last, v_last = ext[-1]
        # value where the wrap segment crosses 0 (== period)
        gap = x_first + P - x_last
        v_wrap = v_last + (v_first - v_last) * (P - x_last) / gap
        pts = []
        if x_first > 0:
            pts.append((Fraction(0), v_wrap))
        pts.extend(ext)
        pts.append((P, v_wrap if x_first > 0 else v_first))
        return [(x0, x1, v0, v1) for (x0, v0), (x1, v1) in zip(pts, pts[1:])]

    def __call__(self, y: RatLike) -> Fraction:
        y = _periodic_mod(rat(y), self.period)
        for x0, x1, v0, v1 in self.segments():
            if x0 <= y < x1:
                return v0 + (v1 - v0) * (y - x0) / (x1 - x0)
        raise AssertionError("unreachable: segments tile the period")

    @property
    def max_value(self) -> Fraction:
        return max(v for _, v in self.nodes)

    @property
    def min_value(self) -> Fraction:
        return min(v for _, v in self.nodes)

    def plateaus(self) -> dict[Fraction, Fraction]:
        """Measure of every flat (constant) stretch, keyed by its value."""
        out: dict[Fraction, Fraction] = {}
        for x0, x1, v0, v1 in self.segments():
            if v0 == v1:
                out[v0] = out.get(v0, Fraction(0)) + (x1 - x0)
        return out

    def ramp_measure(self) -> Fraction:
        return sum((x1 - x0 for x0, x1, v0, v1 in self.segments() if v0 != v1), Fraction(0))


def _clip_segment(seg, lo: Fraction, hi: Fraction):
    x0, x1, v0, v1 = seg
    a, b = max(x0, lo), min(x1, hi)
    if a >= b:
        return None
    slope = (v1 - v0) / (x1 - x0)
    return a, b, v0 + slope * (a - x0), v0 + slope * (b - x0)


def level_set_measures(
    g: PiecewiseLinear, v: RatLike, lo: RatLike | None = None, hi: RatLike | None = None
) -> tuple[Fraction, Fraction]:
    """Exact measures of ``{g = v}`` and ``{g >= v}`` inside one period.

    ``lo``/``hi`` optionally restrict the count to ``[lo, hi)`` within
    ``[0, period)``.
    """
    v = rat(v)
    lo = Fraction(0) if lo is None else rat(lo)
    hi = g.period if hi is None else rat(hi)
    if not 0 <= lo <= hi <= g.period:
        raise ValueError("restriction window must lie inside [0, period]")
    eq = Fraction(0)
    ge = Fraction(0)
    for seg in g.segments():
        clipped = _clip_segment(seg, lo, hi)
        if clipped is None:
            continue
        x0, x1, v0, v1 = clipped
        length = x1 - x0
        if v0 == v1:
            if v0 == v:
                eq += length
            if v0 >= v:
                ge += length
            continue
        s = (v - v0) / (v1 - v0)  # crossing position as a fraction of the segment
        s = min(max(s, Fraction(0)), Fraction(1))
        ge += length * (1 - s) if v1 > v0 else length * s
    return eq, ge


def window_average_profile(f: PiecewiseConst, w: RatLike) -> PiecewiseLinear:
    """``g(y) = (1/w) ∫_y^{y+w} f`` as an exact piecewise-affine function."""
    w = rat(w)
    if w <= 0:
        raise ValueError("window length must be positive")
    P = f.period
    cuts = set()
    for b in f.breaks[:-1]:
        cuts.add(b)
        cuts.add(_periodic_mod(b - w, P))
    nodes = tuple((y, (f.antiderivative(y + w) - f.antiderivative(y)) / w) for y in sorted(cuts))
    return PiecewiseLinear(P, _drop_collinear(nodes, P))


def _drop_collinear(nodes: Sequence[tuple[Fraction, Fraction]], period: Fraction):
    """Remove interior nodes that lie on the line through their neighbours."""
    if len(nodes) <= 2:
        return tuple(nodes)
    keep = []
    n = len(nodes)
    for i in range(n):
        xp, vp = nodes[i - 1]
        x, v = nodes[i]
        xn, vn = nodes[(i + 1) % n]
        if i == 0:
            xp -= period
        if i == n - 1:
            xn += period
        if (v - vp) * (xn - x) != (vn - v) * (x - xp):
            keep.append(nodes[i])
    return tuple(keep) if keep else (nodes[0],)


def lcm_den(xs: Iterable[Fraction]) -> int:
    out = 1
    for x in xs:
        out = math.lcm(out, x.denominator)
    return out
