"""Two-column special flows, one per stage of the slow-rate construction.

Each stage is a concrete flow over the base ``[0, c_w + d_w)``: points above
``[0, c_w)`` rise to height ``h``, points above ``[c_w, c_w + d_w)`` to
``h + eps``; at the roof the base is rotated and motion restarts at height 0.
"""

from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction

from .core import PiecewiseConst, fmt_rat, level_set_measures, rat, window_average_profile
from .errors import ConfigInvalid, PhiTooSlow
from .phi import PhiSpec, log2_rat

__all__ = [
    "Column",
    "RudolphParams",
    "RudolphPoint",
    "BaseRotation",
    "GOLDEN_CONVERGENT",
    "rudolph_evolve",
    "fn_rudolph",
    "stage_profile",
    "stage_integral",
    "StageDistribution",
    "stage_distribution",
    "StageSchedule",
    "stage_schedule_solve",
    "plateau_points",
    "PhiRow",
    "PhiReport",
    "phi_ratio_experiment",
]

# 987/1597, a convergent of the golden ratio conjugate
GOLDEN_CONVERGENT = Fraction(987, 1597)


class Column(enum.Enum):
    SHORT = "short"
    TALL = "tall"


@dataclass(frozen=True)
class RudolphParams:
    h: Fraction
    eps: Fraction
    c_w: Fraction
    d_w: Fraction
    delta: Fraction
    a: Fraction

    def __post_init__(self):
        for name in ("h", "eps", "c_w", "d_w", "delta", "a"):
            v = rat(getattr(self, name))
            if v <= 0:
                raise ConfigInvalid(f"{name} must be positive")
            object.__setattr__(self, name, v)
        if self.delta >= Fraction(1, 4):
            raise ConfigInvalid("delta must be below 1/4")
        if self.h * self.c_w + (self.h + self.eps) * self.d_w != 1:
            raise ConfigInvalid("column areas must add up to 1")

    @classmethod
    def solve(cls, h, eps, c_w, delta, a) -> "RudolphParams":
        """Fill in ``d_w`` from the total-measure constraint."""
        h, eps, c_w = rat(h), rat(eps), rat(c_w)
        return cls(h, eps, c_w, (1 - h * c_w) / (h + eps), delta, a)

    @property
    def t(self) -> Fraction:
        return self.h * self.delta

    @property
    def width(self) -> Fraction:
        return self.c_w + self.d_w

    def roof(self, column: Column) -> Fraction:
        return self.h if column is Column.SHORT else self.h + self.eps

    def column_of(self, x: Fraction) -> Column:
        return Column.SHORT if x < self.c_w else Column.TALL

    def to_json(self) -> dict:
        return {
            "h": fmt_rat(self.h),
            "eps": fmt_rat(self.eps),
            "c": fmt_rat(self.c_w),
            "d": fmt_rat(self.d_w),
            "delta": fmt_rat(self.delta),
            "a": fmt_rat(self.a),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "RudolphParams":
        try:
            return cls(*(rat(obj[k]) for k in ("h", "eps", "c", "d", "delta", "a")))
        except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
            raise ConfigInvalid(f"bad stage entry: {exc}") from exc


@dataclass(frozen=True)
class RudolphPoint:
    """``x`` is a coordinate on the combined base, so it also names the column."""

    column: Column
    x: Fraction
    y: Fraction

    def validate(self, p: RudolphParams) -> None:
        if not 0 <= self.x < p.width or p.column_of(self.x) is not self.column:
            raise ValueError("x outside the base of its column")
        if not 0 <= self.y < p.roof(self.column):
            raise ValueError("y outside the column")


@dataclass(frozen=True)
class BaseRotation:
    """Rotation of ``[0, width)`` by ``shift``: an exact two-interval exchange."""

    width: Fraction
    shift: Fraction

    @classmethod
    def default(cls, p: RudolphParams, r: Fraction = GOLDEN_CONVERGENT) -> "BaseRotation":
        return cls(p.width, p.width * r)

    def __call__(self, x: Fraction) -> Fraction:
        v = x + self.shift
        return v - self.width if v >= self.width else v


def rudolph_evolve(pt: RudolphPoint, t, p: RudolphParams, base_map=None) -> RudolphPoint:
    t = rat(t)
    if t < 0:
        raise ValueError("negative time")
    base_map = base_map or BaseRotation.default(p)
    col, x, y = pt.column, pt.x, pt.y
    while True:
        roof = p.roof(col)
        if y + t < roof:
            return RudolphPoint(col, x, y + t)
        t -= roof - y
        x = base_map(x)
        col, y = p.column_of(x), Fraction(0)


def fn_rudolph(y, p: RudolphParams) -> Fraction:
    y = rat(y)
    h = p.h
    if 0 <= y < h / 4:
        return p.a
    if h / 2 <= y < 3 * h / 4:
        return -p.a
    return Fraction(0)


def stage_profile(p: RudolphParams, column: Column) -> PiecewiseConst:
    h = p.h
    return PiecewiseConst.from_pieces(p.roof(column), [(0, h / 4, p.a), (h / 2, 3 * h / 4, -p.a)])


def stage_integral(pt: RudolphPoint, t, p: RudolphParams, base_map=None) -> Fraction:
    """Exact ``∫_0^t f(T_s pt) ds``, following every roof crossing."""
    t = rat(t)
    base_map = base_map or BaseRotation.default(p)
    profiles = {c: stage_profile(p, c) for c in Column}
    col, x, y = pt.column, pt.x, pt.y
    total = Fraction(0)
    while t > 0:
        roof = p.roof(col)
        run = min(t, roof - y)
        total += profiles[col].integrate(y, y + run)
        t -= run
        x = base_map(x)
        col, y = p.column_of(x), Fraction(0)
    return total


@dataclass(frozen=True)
class StageDistribution:
    """Measures of the value sets of the stage average over non-crossing starts.

    ``exceptional`` is the measure of starts whose window reaches the roof;
    their values are only bounded, not computed.
    """

    plus: Fraction
    minus: Fraction
    zero: Fraction
    ramps: Fraction
    exceptional: Fraction
    m_D: Fraction
    m_D_formula: Fraction
    m_D_lower: Fraction

    @property
    def identity_holds(self) -> bool:
        return self.m_D == self.m_D_formula

    @property
    def strict_lower_holds(self) -> bool:
        return self.m_D > self.m_D_lower

    @property
    def symmetric(self) -> bool:
        return self.plus == self.minus

    @property
    def total(self) -> Fraction:
        return self.plus + self.minus + self.zero + self.ramps + self.exceptional


def stage_distribution(p: RudolphParams) -> StageDistribution:
    t = p.t
    plus = minus = zero = ramps = Fraction(0)
    for col, w in ((Column.SHORT, p.c_w), (Column.TALL, p.d_w)):
        roof = p.roof(col)
        g = window_average_profile(stage_profile(p, col), t)
        lo, hi = Fraction(0), roof - t
        eq_p, _ = level_set_measures(g, p.a, lo, hi)
        eq_m, _ = level_set_measures(g, -p.a, lo, hi)
        eq_0, _ = level_set_measures(g, 0, lo, hi)
        plus += w * eq_p
        minus += w * eq_m
        zero += w * eq_0
        ramps += w * (hi - lo - eq_p - eq_m - eq_0)
    quarter = Fraction(1, 4)
    return StageDistribution(
        plus=plus,
        minus=minus,
        zero=zero,
        ramps=ramps,
        exceptional=p.width * t,
        m_D=plus + minus,
        m_D_formula=2 * (quarter - p.delta) * (1 - p.eps * p.d_w),
        m_D_lower=Fraction(1, 2) - 2 * p.delta - p.eps * p.d_w / 2,
    )


@dataclass
class StageSchedule:
    """Solved stages plus a bound on ``sum_{m>N} a_m`` past the prefix."""

    stages: list[RudolphParams]
    beyond_a: Fraction = Fraction(0)
    phi: PhiSpec | None = None
    certificate: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.stages)

    def __getitem__(self, n: int) -> RudolphParams:
        if not 1 <= n <= len(self.stages):
            raise IndexError(f"stage {n} outside 1..{len(self.stages)}")
        return self.stages[n - 1]

    def tail_a(self, n: int) -> Fraction:
        return sum((s.a for s in self.stages[n:]), Fraction(0)) + self.beyond_a

    def alpha(self, n: int) -> Fraction:
        return self.tail_a(n) / self[n].a

    def earlier_bound(self, n: int) -> Fraction:
        """``(2/t_n) sum_{m<n} a_m h_m``: bound on the earlier stages' average."""
        s = self[n]
        return 2 * sum((e.a * e.h for e in self.stages[: n - 1]), Fraction(0)) / s.t

    def slack(self, n: int) -> Fraction:
        return self.earlier_bound(n) + self.tail_a(n)

    def condition_I(self) -> Fraction:
        return sum((s.eps * s.d_w + 4 * s.delta for s in self.stages), Fraction(0))

    def validate(self) -> dict:
        checks = {
            "measure one": all(s.h * s.c_w + (s.h + s.eps) * s.d_w == 1 for s in self.stages),
            "(I) prefix sum < 1": self.condition_I() < 1,
            "a_n decreasing": all(b.a < a.a for a, b in zip(self.stages, self.stages[1:])),
            "delta_n < 1/8": all(s.delta < Fraction(1, 8) for s in self.stages),
        }
        trends = []
        for n in range(1, len(self) + 1):
            s = self[n]
            row = {
                "n": n,
                "alpha": float(self.alpha(n)),
                "h_ratio": float(sum((e.h for e in self.stages[: n - 1]), Fraction(0)) / (s.h * s.a * s.delta)),
            }
            if self.phi is not None:
                tail = self.tail_a(n)
                row["log2_tail_phi_ratio"] = log2_rat(tail) - self.phi.log2(s.t) if tail else -math.inf
            trends.append(row)
        self.certificate = {"checks": checks, "trends": trends}
        return self.certificate

    @property
    def ok(self) -> bool:
        return all(self.validate()["checks"].values())

    def to_json(self) -> list[dict]:
        return [s.to_json() for s in self.stages]

    @classmethod
    def from_json(cls, obj, phi: PhiSpec | None = None) -> "StageSchedule":
        if not isinstance(obj, list):
            raise ConfigInvalid("stage schedule must be a JSON list")
        return cls([RudolphParams.from_json(o) for o in obj], Fraction(0), phi)


def _default_stage(n: int, e: int) -> RudolphParams:
    h = Fraction(1 << e)
    eps = Fraction(1, 1 << n)
    return RudolphParams(
        h=h,
        eps=eps,
        c_w=3 / (4 * h),
        d_w=1 / (4 * (h + eps)),
        delta=Fraction(1, 8 << n),
        a=Fraction(1, 1 << (n * n)),
    )


def _beyond_a(N: int) -> Fraction:
    # sum_{m>N} 2^-m^2 <= 2^-(N+1)^2 / (1 - 2^-(2N+3))
    return Fraction(1, 1 << ((N + 1) ** 2)) / (1 - Fraction(1, 1 << (2 * N + 3)))


def stage_schedule_solve(
    N: int,
    phi: PhiSpec,
    exponent_cap: int = 1 << 20,
    min_plateau_growth: int = 10,
) -> StageSchedule:
    """Stage-by-stage choice of ``h_n = 2**e_n`` with ``e_n`` minimal such that

    * ``(h_1 + ... + h_{n-1}) / (h_n a_n delta_n) <= 2**-n``;
    * ``a_n alpha_n / phi(t_n) >= n`` times its value at stage ``n - 1``;
    * the certified plateau ratio at stage ``n`` (lower end) is at least
      ``min_plateau_growth`` times the one at stage ``n - 1`` (upper end);
    * ``t_n`` lies in the domain of ``phi``.

    Each condition is monotone in ``e``, so the minimum is found by doubling
    then bisection. Tails ``alpha_n`` use the default continuation
    ``a_m = 2**-m**2`` for ``m > N``.
    """
    if N < 1:
        raise ValueError("need at least one stage")
    beyond = _beyond_a(N)
    a = [Fraction(1, 1 << (n * n)) for n in range(1, N + 1)]
    tails = [sum(a[n:], Fraction(0)) + beyond for n in range(1, N + 1)]
    stages: list[RudolphParams] = []
    prev_tail_ratio = None
    prev_plateau_hi = None

    def feasible(n: int, e: int) -> bool:
        s = _default_stage(n, e)
        if s.t < phi.domain_min() or s.t <= 1:
            return False
        if n == 1:
            return True
        h_sum = sum((x.h for x in stages), Fraction(0))
        if h_sum > Fraction(1, 1 << n) * s.h * s.a * s.delta:
            return False
        lphi = phi.log2(s.t)
        if log2_rat(tails[n - 1]) - lphi < math.log2(n) + prev_tail_ratio:
            return False
        earlier = 2 * sum((x.a * x.h for x in stages), Fraction(0)) / s.t
        lo = s.a - earlier - tails[n - 1]
        if lo <= 0:
            return False
        return log2_rat(lo) - lphi >= math.log2(min_plateau_growth) + prev_plateau_hi

    for n in range(1, N + 1):
        lo_e = stages[-1].h.numerator.bit_length() if stages else 0
        hi_e = max(lo_e, 1)
        while not feasible(n, hi_e):
            if hi_e > exponent_cap:
                raise PhiTooSlow(f"stage {n} needs h above 2**{exponent_cap}")
            lo_e, hi_e = hi_e, min(2 * hi_e, exponent_cap + 1)
        while hi_e - lo_e > 1:
            mid = (lo_e + hi_e) // 2
            if feasible(n, mid):
                hi_e = mid
            else:
                lo_e = mid
        e = hi_e if not feasible(n, lo_e) else lo_e
        s = _default_stage(n, e)
        stages.append(s)
        lphi = phi.log2(s.t)
        prev_tail_ratio = log2_rat(tails[n - 1]) - lphi
        earlier = 2 * sum((x.a * x.h for x in stages[:-1]), Fraction(0)) / s.t
        prev_plateau_hi = log2_rat(s.a + earlier + tails[n - 1]) - lphi
    sched = StageSchedule(stages, beyond, phi)
    sched.validate()
    return sched


def plateau_points(p: RudolphParams, count: int, seed: int = 0, depth: int = 20) -> list[RudolphPoint]:
    """Seeded points whose window ``[y, y + t)`` sits inside the ``+a`` band."""
    rng = random.Random(seed)
    out = []
    top = p.h / 4 - p.t
    for _ in range(count):
        x = p.width * Fraction(rng.getrandbits(depth), 1 << depth)
        y = top * Fraction(rng.getrandbits(depth), 1 << depth)
        out.append(RudolphPoint(p.column_of(x), x, y))
    return out


@dataclass(frozen=True)
class PhiRow:
    n: int
    log2_t: float
    value: Fraction
    slack: Fraction
    log2_ratio_lo: float
    log2_ratio_hi: float
    points: int

    @property
    def in_band(self) -> bool:
        return self.slack < abs(self.value)


@dataclass
class PhiReport:
    rows: list[PhiRow] = field(default_factory=list)

    def growth_log2(self) -> list[float]:
        """``log2`` of lower(ratio_n) / upper(ratio_{n-1})."""
        return [b.log2_ratio_lo - a.log2_ratio_hi for a, b in zip(self.rows, self.rows[1:])]

    @property
    def strictly_increasing(self) -> bool:
        return all(g > 0 for g in self.growth_log2())


def phi_ratio_experiment(
    sched: StageSchedule, phi: PhiSpec, points_per_stage: int = 8, seed: int = 0
) -> PhiReport:
    """Certified ``|A(f, t_n, pt)| / phi(t_n)`` at plateau points of each stage.

    The current stage is integrated exactly; earlier stages contribute at
    most ``(2/t_n) sum_{m<n} a_m h_m`` and later ones at most ``sum_{m>n} a_m``.
    Per stage the row keeps the smallest certified lower and largest upper
    ratio over the sampled points.
    """
    report = PhiReport()
    if points_per_stage <= 0:
        return report
    for n in range(1, len(sched) + 1):
        s = sched[n]
        slack = sched.slack(n)
        lphi = phi.log2(s.t)
        vals = [stage_integral(pt, s.t, s) / s.t for pt in plateau_points(s, points_per_stage, seed + n)]
        v_min = min(vals, key=abs)
        v_max = max(vals, key=abs)
        lo = abs(v_min) - slack
        report.rows.append(
            PhiRow(
                n=n,
                log2_t=log2_rat(s.t),
                value=v_min,
                slack=slack,
                log2_ratio_lo=log2_rat(lo) - lphi if lo > 0 else -math.inf,
                log2_ratio_hi=log2_rat(abs(v_max) + slack) - lphi,
                points=len(vals),
            )
        )
    return report
