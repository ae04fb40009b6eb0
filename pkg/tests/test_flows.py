import math
import random
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from birkhoff_lab.constructions import FamilyMode, build_fn_thm2, schedule_default, series_from_schedule
from birkhoff_lab.core import Dyadic, PiecewiseConst
from birkhoff_lab.errors import ToleranceNotMet, TruncationTooDeep
from birkhoff_lab.flows import (
    SeriesFunction,
    TowerFunction,
    birkhoff_avg_rotation,
    birkhoff_avg_tower_exact,
    circle_evolve,
    odometer_flow_evolve,
    periodic_bound_check,
)
from birkhoff_lab.odometer import SquarePoint, tower_coords
from birkhoff_lab.oracles import orbit_total_variation, riemann_integral, riemann_rotation_average
from birkhoff_lab.quadrature import birkhoff_avg_quadrature, integrate_pieces
from birkhoff_lab.sampling import dyadic_points

from conftest import piecewise_consts, rationals, square_points

SQUARE = PiecewiseConst(1, (0, Fraction(1, 2), 1), (1, -1))
D = Dyadic.from_fraction


def random_term(rng, level, x_pieces):
    """A tower term with random zero-mean column profiles."""
    H = 1 << level
    width = Fraction(1, H)
    cuts = sorted({Fraction(rng.randrange(1, 64), 64) * width for _ in range(x_pieces - 1)})
    xs = [Fraction(0)] + cuts + [width]
    pieces = []
    for lo, hi in zip(xs, xs[1:]):
        ycuts = sorted({Fraction(rng.randrange(1, 8 * H), 8) for _ in range(3)})
        breaks = (Fraction(0), *ycuts, Fraction(H))
        vals = [Fraction(rng.randrange(-8, 9), 4) for _ in range(len(breaks) - 1)]
        prof = PiecewiseConst(H, breaks, tuple(vals))
        prof = prof + PiecewiseConst.constant(H, -prof.mean)
        pieces.append((lo, hi, prof))
    return TowerFunction(level, tuple(pieces))


class TestEvolve:
    @pytest.mark.parametrize(
        "x, t, out",
        [(0, 1, 0), (Fraction(1, 3), Fraction(1, 2), Fraction(5, 6)), (Fraction(3, 4), Fraction(1, 2), Fraction(1, 4))],
    )
    def test_circle(self, x, t, out):
        assert circle_evolve(x, t) == out

    def test_odometer_flow_examples(self):
        p = SquarePoint(D(Fraction(1, 4)), Fraction(1, 8))
        assert odometer_flow_evolve(p, Fraction(1, 2)) == SquarePoint(D(Fraction(1, 4)), Fraction(5, 8))
        assert odometer_flow_evolve(SquarePoint(Dyadic(0), Fraction(1, 2)), 1) == SquarePoint(D(Fraction(1, 2)), Fraction(1, 2))
        assert odometer_flow_evolve(SquarePoint(Dyadic(0), 0), 3) == SquarePoint(D(Fraction(3, 4)), 0)

    @given(square_points(), rationals(16, 0, 20).filter(lambda t: t >= 0), rationals(16, 0, 20).filter(lambda t: t >= 0))
    def test_flow_property(self, p, s, t):
        assert odometer_flow_evolve(odometer_flow_evolve(p, s), t) == odometer_flow_evolve(p, s + t)


class TestRotationAverage:
    def test_examples(self):
        assert birkhoff_avg_rotation(SQUARE, 1, 0) == 0
        assert birkhoff_avg_rotation(SQUARE, Fraction(1, 2), 0) == 1

    def test_large_time_bound_and_oracle(self):
        t = Fraction(1 << 10)
        x = Fraction(1, 8)
        a = birkhoff_avg_rotation(SQUARE, t, x)
        assert abs(a) <= SQUARE.abs_integral / t
        # Riemann error per unit time: step times the two jumps per period
        oracle = riemann_rotation_average(SQUARE, t, x, step_exp=10)
        assert abs(a - oracle) <= Fraction(2, 1 << 10)

    @given(piecewise_consts(period=Fraction(1), zero_mean=True), rationals(64, 0, 1), st.integers(1, 500))
    def test_integer_times_vanish(self, f, x, t):
        assert birkhoff_avg_rotation(f, t, x) == 0

    @given(piecewise_consts(period=Fraction(1), zero_mean=True), rationals(64, 0, 1), rationals(64, 0, 50).filter(lambda t: t > 0))
    def test_periodic_bound(self, f, x, t):
        r = periodic_bound_check(f, t, x)
        assert r.lhs <= r.rhs

    def test_periodic_bound_examples(self):
        r = periodic_bound_check(SQUARE, Fraction(7, 3), 0)
        assert r.ok
        c = PiecewiseConst.constant(1, 3)
        r = periodic_bound_check(c, Fraction(5, 2), Fraction(1, 7))
        assert (r.lhs, r.rhs) == (0, Fraction(12, 5))


class TestTowerEngine:
    def test_zero_term(self):
        f = SeriesFunction((TowerFunction.uniform(1, PiecewiseConst.constant(2, 0)),))
        cv = birkhoff_avg_tower_exact(f, Fraction(3), SquarePoint(Dyadic(0), 0))
        assert (cv.exact, cv.tail) == (0, 0)

    def test_full_period_vanishes(self):
        s = schedule_default(3, FamilyMode.DIVERGENT)
        f = SeriesFunction((build_fn_thm2(s, 2),))
        rng = random.Random(1)
        for _ in range(20):
            x = Dyadic(rng.getrandbits(20) << s[2].p, 20 + s[2].p)
            cv = birkhoff_avg_tower_exact(f, Fraction(1 << s[2].p), SquarePoint(x, 0))
            assert cv.exact == 0

    def test_trunc_too_deep(self):
        f = SeriesFunction((TowerFunction.uniform(1, PiecewiseConst.constant(2, 0)),))
        with pytest.raises(TruncationTooDeep):
            birkhoff_avg_tower_exact(f, 1, SquarePoint(Dyadic(0), 0), trunc=2)

    def test_tail_uses_smaller_bound(self):
        term = TowerFunction.uniform(1, PiecewiseConst(2, (0, 1, 2), (1, -1)))
        f = SeriesFunction((term,), beyond_sup=Fraction(1), beyond_infty1=Fraction(1, 4))
        cv = birkhoff_avg_tower_exact(f, Fraction(8), SquarePoint(Dyadic(0), 0), trunc=0)
        assert cv.tail == min(Fraction(2), 2 * (Fraction(2) + Fraction(1, 4)) / 8)

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_riemann_oracle(self, seed):
        rng = random.Random(seed)
        term = random_term(rng, rng.randrange(1, 4), rng.randrange(1, 4))
        p = SquarePoint(Dyadic(rng.getrandbits(12), 12), Fraction(rng.getrandbits(10), 1 << 10))
        t = Fraction(rng.randrange(1, 40 << 10), 1 << 10)
        exact = birkhoff_avg_tower_exact(SeriesFunction((term,)), t, p).exact * t
        oracle = riemann_integral(term, p, t, step_exp=10)
        assert abs(exact - oracle) <= Fraction(1, 1 << 10) * (orbit_total_variation(term, p, t) + term.sup_norm)

    @given(square_points(10), st.integers(1, 3 * 64).map(lambda k: Fraction(k, 8)))
    def test_matches_direct_orbit_walk(self, p, t):
        rng = random.Random(hash((p.x.num, p.y, t)) & 0xFFFF)
        term = random_term(rng, 2, 3)
        # independent route: walk the orbit unit cell by unit cell
        total = Fraction(0)
        q, left = p, t
        while left > 0:
            step = min(1 - q.y, left)
            tc = tower_coords(q, term.level)
            total += term.profile_at(tc.x_n).integrate(tc.y_n, tc.y_n + step)
            q = odometer_flow_evolve(q, step)
            left -= step
        assert birkhoff_avg_tower_exact(SeriesFunction((term,)), t, p).exact == total / t

    def test_cost_independent_of_time(self):
        s = schedule_default(4, FamilyMode.CONVERGENT)
        f = series_from_schedule(s)
        p = dyadic_points(1, 30, 3)[0]
        cv = birkhoff_avg_tower_exact(f, Fraction((1 << 400) + 1), p)
        assert cv.abs_upper < Fraction(1, 1 << 390)


class TestQuadrature:
    def test_zero_and_one(self):
        assert integrate_pieces(lambda s: 0.0, 0, 3, 1e-12).value == 0
        r = birkhoff_avg_quadrature(lambda x, y: 1.0, 5.5, (0.1, 0.2), math.sqrt(2), 1e-12)
        assert abs(r.value - 1) <= 1e-12

    def test_polynomial_exact(self):
        r = integrate_pieces(lambda s: s**3 - 2 * s, 0, 2, 1e-13)
        assert abs(r.value - 0.0) <= 1e-13

    def test_breakpoints_help_discontinuity(self):
        r = integrate_pieces(lambda s: 1.0 if s < 1 / 3 else -1.0, 0, 1, 1e-12, breakpoints=[1 / 3])
        assert abs(r.value - (1 / 3 - 2 / 3)) <= 1e-12

    def test_blind_refinement_stalls(self):
        with pytest.raises(ToleranceNotMet):
            integrate_pieces(lambda s: 1.0 if s < 1 / 3 else -1.0, 0, 1, 1e-15, max_depth=8)

    def test_bad_tolerance(self):
        with pytest.raises(ValueError):
            integrate_pieces(lambda s: s, 0, 1, 0)
