"""Function families over the odometer suspension and their schedules.

Two regimes share one builder:

* convergent mode: column norms are summable, so averages decay like 1/t
  uniformly;
* divergent mode: the column norms diverge while the sup norms stay
  summable, and along ``t_n = 2**(p_n - 2)`` the averages decay only like
  ``a_n d_n``.
"""

from __future__ import annotations

import enum
import functools
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .core import PiecewiseConst, fmt_rat, level_set_measures, rat, window_average_profile
from .errors import BoundViolated, ConfigInvalid
from .flows import SeriesFunction, TowerFunction, birkhoff_avg_tower_exact
from .odometer import SquarePoint, TowerCoords, from_lsb_int, tower_uncoords
from .rates import RateReport, RateRow, rate_fit
from .sampling import pmap

__all__ = [
    "FamilyMode",
    "ScheduleEntry",
    "Thm2Schedule",
    "Check",
    "ScheduleCertificate",
    "schedule_default",
    "schedule_validate",
    "build_fn_thm2",
    "series_from_schedule",
    "two_piece_series",
    "vanish_check_earlier_terms",
    "thm1_uniform_bound_sweep",
    "Thm2Distribution",
    "thm2_distribution",
    "thm2_rate_sweep",
    "plateau_points",
    "zero_band_points",
]


class FamilyMode(enum.Enum):
    CONVERGENT = "convergent"
    DIVERGENT = "divergent"


@dataclass(frozen=True)
class ScheduleEntry:
    p: int
    a: Fraction
    d: Fraction

    def __post_init__(self):
        object.__setattr__(self, "a", rat(self.a))
        object.__setattr__(self, "d", rat(self.d))

    @property
    def L(self) -> Fraction:
        """Length of each signed plateau of the column profile."""
        return self.d * Fraction(2) ** (self.p - 1)

    @property
    def t(self) -> Fraction:
        return Fraction(2) ** (self.p - 2)

    @property
    def period(self) -> int:
        return 1 << self.p


@dataclass(frozen=True)
class Thm2Schedule:
    """Stored prefix of ``(p_n, a_n, d_n)`` plus bounds on what follows it.

    ``beyond_a`` bounds ``sum_{m>N} a_m``; ``beyond_infty1`` bounds the sum
    of the column norms past the prefix, or is ``None`` when that diverges.
    Schedules read from files describe finite sums, so both default to 0.
    """

    entries: tuple[ScheduleEntry, ...]
    beyond_a: Fraction = Fraction(0)
    beyond_infty1: Fraction | None = Fraction(0)

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        object.__setattr__(self, "beyond_a", rat(self.beyond_a))

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, n: int) -> ScheduleEntry:
        """1-based access, matching the n of the construction."""
        if not 1 <= n <= len(self.entries):
            raise IndexError(f"stage {n} outside 1..{len(self.entries)}")
        return self.entries[n - 1]

    def tail_a(self, n: int) -> Fraction:
        return sum((e.a for e in self.entries[n:]), Fraction(0)) + self.beyond_a

    def alpha(self, n: int) -> Fraction:
        return self.tail_a(n) / self[n].a

    def eta(self, n: int) -> Fraction:
        e = self[n]
        return self.tail_a(n) / (e.a * e.d)

    def to_json(self) -> list[dict]:
        return [{"p": e.p, "a": fmt_rat(e.a), "d": fmt_rat(e.d)} for e in self.entries]

    @classmethod
    def from_json(cls, obj) -> "Thm2Schedule":
        if not isinstance(obj, list):
            raise ConfigInvalid("schedule file must be a JSON list")
        try:
            return cls(tuple(ScheduleEntry(int(o["p"]), rat(o["a"]), rat(o["d"])) for o in obj))
        except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
            raise ConfigInvalid(f"bad schedule entry: {exc}") from exc


def schedule_default(N: int, mode: FamilyMode) -> Thm2Schedule:
    """Default schedules whose conditions reduce to integer inequalities.

    Divergent: ``p_n = n^2 + 3n``, ``a_n = 2^-n^2``, ``d_n = 1/4``.
    Convergent: ``p_n = 2n``, ``a_n = 2^-3n``, ``d_n = 1/4``, so every column
    norm ``2 a_n L_n = 2^-(n+2)`` and their sum is 1/4.
    """
    if N < 1:
        raise ValueError("a schedule needs at least one entry")
    quarter = Fraction(1, 4)
    if mode is FamilyMode.DIVERGENT:
        entries = tuple(ScheduleEntry(n * n + 3 * n, Fraction(1, 1 << (n * n)), quarter) for n in range(1, N + 1))
        # sum_{m>N} 2^-m^2 <= 2^-(N+1)^2 / (1 - 2^-(2N+3))
        head = Fraction(1, 1 << ((N + 1) ** 2))
        beyond_a = head / (1 - Fraction(1, 1 << (2 * N + 3)))
        return Thm2Schedule(entries, beyond_a, None)
    entries = tuple(ScheduleEntry(2 * n, Fraction(1, 1 << (3 * n)), quarter) for n in range(1, N + 1))
    return Thm2Schedule(entries, Fraction(1, 7 * (1 << (3 * N))), Fraction(1, 1 << (N + 2)))


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class ScheduleCertificate:
    """Outcome of validating a stored prefix.

    ``checks`` are exact pass/fail items; ``trends`` hold the finite-prefix
    ratios behind the asymptotic conditions, for inspection only.
    """

    mode: FamilyMode
    checks: list[Check] = field(default_factory=list)
    trends: list[dict] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def violations(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]


def schedule_validate(s: Thm2Schedule, mode: FamilyMode) -> ScheduleCertificate:
    cert = ScheduleCertificate(mode)
    add = cert.checks.append
    es = s.entries
    if not es:
        add(Check("non-empty schedule", False))
        return cert
    for n, e in enumerate(es, 1):
        if e.p < 2:
            add(Check("p_n >= 2", False, f"n={n}: p={e.p}"))
        if e.a <= 0:
            add(Check("a_n > 0", False, f"n={n}: a={e.a}"))
        if not 0 < e.d < Fraction(1, 2):
            add(Check("d_n in (0, 1/2)", False, f"n={n}: d={e.d}"))
    for n, (e0, e1) in enumerate(zip(es, es[1:]), 1):
        if e1.p < e0.p + 2:
            add(Check("spacing p_{n+1} >= p_n + 2", False, f"n={n}: {e0.p} -> {e1.p}"))
        if not e1.a < e0.a:
            add(Check("a_n strictly decreasing", False, f"n={n}: {e0.a} -> {e1.a}"))
    if mode is FamilyMode.DIVERGENT:
        for n, en in enumerate(es, 1):
            for m in range(n + 1, len(es) + 1):
                em = es[m - 1]
                if not en.t < em.d * Fraction(2) ** (em.p - 1):
                    add(Check("2^{p_n-2} < d_m 2^{p_m-1}", False, f"n={n}, m={m}"))
    else:
        if s.beyond_infty1 is None:
            add(Check("column norms summable", False, "remainder bound missing"))
    names = {c.name for c in cert.checks}
    for name in (
        "p_n >= 2",
        "a_n > 0",
        "d_n in (0, 1/2)",
        "spacing p_{n+1} >= p_n + 2",
        "a_n strictly decreasing",
    ):
        if name not in names:
            add(Check(name, True))
    if mode is FamilyMode.DIVERGENT and "2^{p_n-2} < d_m 2^{p_m-1}" not in names:
        add(Check("2^{p_n-2} < d_m 2^{p_m-1}", True))
    if mode is FamilyMode.CONVERGENT and s.beyond_infty1 is not None:
        add(Check("column norms summable", True))

    valid_entries = all(e.a > 0 and 0 < e.d for e in es)
    for n, e in enumerate(es, 1):
        row = {"n": n, "infty1": 2 * e.a * e.L, "growth": e.a * e.d * e.period}
        if valid_entries:
            row["alpha"] = s.alpha(n)
            row["eta"] = s.eta(n)
        cert.trends.append(row)
    return cert


def _thm2_profile(e: ScheduleEntry) -> PiecewiseConst:
    P = e.period
    half = Fraction(P, 2)
    return PiecewiseConst.from_pieces(P, [(0, e.L, e.a), (half, half + e.L, -e.a)])


def build_fn_thm2(s: Thm2Schedule, n: int) -> TowerFunction:
    """``+a_n`` on ``[0, L_n)``, ``-a_n`` on ``[2^(p_n-1), 2^(p_n-1) + L_n)``."""
    e = s[n]
    return TowerFunction.uniform(e.p, _thm2_profile(e))


def series_from_schedule(s: Thm2Schedule) -> SeriesFunction:
    terms = tuple(build_fn_thm2(s, n) for n in range(1, len(s) + 1))
    return SeriesFunction(terms, s.beyond_a, s.beyond_infty1)


def two_piece_series(N: int) -> SeriesFunction:
    """Convergent family whose profile depends on the digit ``x_{p_n + 1}``.

    On the left half of the tower base the profile is the default one; on the
    right half it is a doubled, quarter-shifted copy, so the column norm
    (a sup over base points) differs from the average column L1 norm.
    """
    s = schedule_default(N, FamilyMode.CONVERGENT)
    terms = []
    for e in s.entries:
        P = e.period
        w = Fraction(1, P)
        left = _thm2_profile(e)
        q = Fraction(P, 4)
        right = PiecewiseConst.from_pieces(P, [(q, q + e.L, -2 * e.a), (3 * q, 3 * q + e.L, 2 * e.a)])
        terms.append(TowerFunction(e.p, ((Fraction(0), w / 2, left), (w / 2, w, right))))
    # doubled amplitudes double both remainder bounds
    return SeriesFunction(tuple(terms), 2 * s.beyond_a, 2 * s.beyond_infty1)


@dataclass(frozen=True)
class VanishResult:
    ok: bool
    witness: tuple[SquarePoint, Fraction] | None = None

    def __bool__(self) -> bool:
        return self.ok


def vanish_check_earlier_terms(s: Thm2Schedule, n: int, points: Sequence[SquarePoint]) -> VanishResult:
    """Exact zero of ``A(f_1 + ... + f_{n-1}, t_n, p)`` at every point."""
    if n <= 1:
        return VanishResult(True)
    partial = SeriesFunction(tuple(build_fn_thm2(s, m) for m in range(1, n)))
    t = s[n].t
    for p in points:
        v = birkhoff_avg_tower_exact(partial, t, p).exact
        if v != 0:
            return VanishResult(False, (p, v))
    return VanishResult(True)


def _averages_over_times(f: SeriesFunction, times: Sequence[Fraction], p: SquarePoint):
    return [birkhoff_avg_tower_exact(f, t, p) for t in times]


def thm1_uniform_bound_sweep(
    f: SeriesFunction, t_grid: Sequence, points: Sequence[SquarePoint], fit: bool = True
) -> RateReport:
    """Check ``|A(f, t, p)| <= 2 sum ||f_n||_{inf,1} / t`` on a grid.

    Raises :class:`BoundViolated` with the offending ``(t, point, value)``.
    """
    total = f.infty1_total()
    if total is None:
        raise ConfigInvalid("uniform 1/t bound needs summable column norms")
    times = [rat(t) for t in t_grid]
    report = RateReport("t")
    if not points:
        return report
    per_point = pmap(functools.partial(_averages_over_times, f, times), points)
    for i, t in enumerate(times):
        bound = 2 * total / t
        sup_cert = Fraction(0)
        sup_exact = Fraction(0)
        for p, vals in zip(points, per_point):
            cv = vals[i]
            if cv.abs_upper > bound:
                raise BoundViolated(f"|A| may exceed 2*sum/t at t={t}", witness=(t, p, cv))
            sup_cert = max(sup_cert, cv.abs_upper)
            sup_exact = max(sup_exact, abs(cv.exact))
        report.rows.append(RateRow(t, sup_cert, bound, len(points), sup_exact=sup_exact))
    if fit and len(times) >= 3 and points:
        report.fit = rate_fit([(float(r.index), float(r.sup_exact)) for r in report.rows])
    return report


@dataclass(frozen=True)
class Thm2Distribution:
    """Normalized measures of the value sets of ``A(f_n, t_n, .)``."""

    n: int
    max_value: Fraction
    min_value: Fraction
    measure_zero: Fraction
    measure_max: Fraction
    measure_min: Fraction
    measure_ramps: Fraction

    @property
    def total(self) -> Fraction:
        return self.measure_zero + self.measure_max + self.measure_min + self.measure_ramps


def thm2_distribution(s: Thm2Schedule, n: int) -> Thm2Distribution:
    e = s[n]
    P = Fraction(e.period)
    g = window_average_profile(_thm2_profile(e), e.t)
    top = 2 * e.a * e.d
    return Thm2Distribution(
        n=n,
        max_value=g.max_value,
        min_value=g.min_value,
        measure_zero=level_set_measures(g, 0)[0] / P,
        measure_max=level_set_measures(g, top)[0] / P,
        measure_min=level_set_measures(g, -top)[0] / P,
        measure_ramps=g.ramp_measure() / P,
    )


def _random_base(rng: random.Random, level: int, depth: int):
    """Random tower-base point: first ``level`` digits zero, ``depth`` digits total."""
    extra = max(depth - level, 0)
    return from_lsb_int(rng.getrandbits(extra) << level) if extra else from_lsb_int(0)


def _points_with_heights(level: int, lo: Fraction, hi: Fraction, count: int, seed: int, depth: int):
    rng = random.Random(seed)
    out = []
    for _ in range(count):
        x_n = _random_base(rng, level, depth)
        y_n = lo + (hi - lo) * Fraction(rng.getrandbits(depth), 1 << depth)
        out.append(tower_uncoords(TowerCoords(level, x_n, y_n)))
    return out


def plateau_points(s: Thm2Schedule, n: int, count: int, seed: int = 0, depth: int = 24):
    """Points whose level-n window ``[y_n, y_n + t_n)`` covers the whole +a_n plateau."""
    e = s[n]
    P = Fraction(e.period)
    return _points_with_heights(e.p, P - (e.t - e.L), P, count, seed, max(depth, e.p + 8))


def zero_band_points(s: Thm2Schedule, n: int, count: int, seed: int = 0, depth: int = 24):
    """Points whose level-n window misses both plateaus."""
    e = s[n]
    P = Fraction(e.period)
    return _points_with_heights(e.p, e.L, P / 2 - e.t, count, seed, max(depth, e.p + 8))


def _certified_at(f: SeriesFunction, t: Fraction, trunc: int, p: SquarePoint):
    return birkhoff_avg_tower_exact(f, t, p, trunc)


def thm2_rate_sweep(s: Thm2Schedule, ns: Sequence[int], points: Sequence[SquarePoint]) -> RateReport:
    """Certified ``sup |A(f, t_n, .)|`` against ``2 a_n d_n + sum_{m>n} a_m``."""
    cert = schedule_validate(s, FamilyMode.DIVERGENT)
    if not cert.ok:
        raise ConfigInvalid("schedule fails validation: " + "; ".join(c.name for c in cert.violations))
    f = series_from_schedule(s)
    report = RateReport("n")
    if not points:
        return report
    for n in ns:
        e = s[n]
        bound = 2 * e.a * e.d + s.tail_a(n)
        vals = pmap(functools.partial(_certified_at, f, e.t, n), points)
        sup_cert = Fraction(0)
        sup_exact = Fraction(0)
        for p, cv in zip(points, vals):
            if cv.abs_upper > bound:
                raise BoundViolated(f"certified |A| exceeds bound at n={n}", witness=(n, p, cv))
            sup_cert = max(sup_cert, cv.abs_upper)
            sup_exact = max(sup_exact, abs(cv.exact))
        report.rows.append(RateRow(n, sup_cert, bound, len(points), scale=e.a * e.d, sup_exact=sup_exact))
    return report
