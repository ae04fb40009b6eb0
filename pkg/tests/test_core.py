import random
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from birkhoff_lab.core import (
    CertifiedValue,
    Dyadic,
    PiecewiseConst,
    PiecewiseLinear,
    level_set_measures,
    pw_integrate,
    rat,
    window_average_profile,
)
from birkhoff_lab.errors import NotDyadic

from conftest import piecewise_consts, rationals

SQUARE = PiecewiseConst(1, (0, Fraction(1, 2), 1), (1, -1))


def thm2_profile(P, L, a):
    half = Fraction(P, 2)
    return PiecewiseConst.from_pieces(P, [(0, L, a), (half, half + L, -a)])


class TestDyadic:
    def test_canonical_form(self):
        assert Dyadic(6, 3) == Dyadic(3, 2)
        assert (Dyadic(6, 3).num, Dyadic(6, 3).exp) == (3, 2)
        assert (Dyadic(0, 5).num, Dyadic(0, 5).exp) == (0, 0)

    def test_from_fraction_rejects_other_denominators(self):
        with pytest.raises(NotDyadic):
            Dyadic.from_fraction(Fraction(1, 3))
        assert Dyadic.from_fraction(Fraction(3, 8)) == Dyadic(3, 3)

    def test_string_round_trip(self):
        d = Dyadic(-5, 7)
        assert str(d) == "-5/2^7"
        assert Dyadic.parse(str(d)) == d

    @given(st.integers(-1000, 1000), st.integers(0, 20), st.integers(-1000, 1000), st.integers(0, 20))
    def test_ring_operations_match_fractions(self, a, e, b, f):
        x, y = Dyadic(a, e), Dyadic(b, f)
        assert (x + y).to_fraction() == x.to_fraction() + y.to_fraction()
        assert (x - y).to_fraction() == x.to_fraction() - y.to_fraction()
        assert (x * y).to_fraction() == x.to_fraction() * y.to_fraction()
        assert x.shift(3).to_fraction() == x.to_fraction() * 8

    def test_digits_msb_first(self):
        assert Dyadic(3, 2).digits() == [1, 1]
        assert Dyadic(1, 3).digits() == [0, 0, 1]

    def test_rat_refuses_floats(self):
        with pytest.raises(TypeError):
            rat(0.5)
        assert rat("3/4") == Fraction(3, 4)
        assert rat("5/2^3") == Fraction(5, 8)


class TestPwIntegrate:
    def test_full_period_of_square_wave(self):
        assert pw_integrate(SQUARE, 0, 1) == 0

    def test_first_half(self):
        assert pw_integrate(SQUARE, 0, Fraction(1, 2)) == Fraction(1, 2)

    def test_symmetric_window(self):
        assert pw_integrate(SQUARE, Fraction(1, 4), Fraction(3, 4)) == 0

    def test_reversed_interval_rejected(self):
        with pytest.raises(ValueError):
            pw_integrate(SQUARE, 1, 0)

    def test_additivity_on_seeded_triples(self):
        rng = random.Random(7)
        f = PiecewiseConst(Fraction(3, 2), (0, Fraction(1, 3), Fraction(5, 6), Fraction(3, 2)), (2, -1, Fraction(1, 2)))
        for _ in range(1000):
            a, b, c = sorted(Fraction(rng.randrange(-4000, 4000), rng.randrange(1, 97)) for _ in range(3))
            assert pw_integrate(f, a, b) + pw_integrate(f, b, c) == pw_integrate(f, a, c)

    @given(piecewise_consts(), rationals(), rationals(), rationals())
    def test_additivity(self, f, a, b, c):
        a, b, c = sorted((a, b, c))
        assert pw_integrate(f, a, b) + pw_integrate(f, b, c) == pw_integrate(f, a, c)

    @given(piecewise_consts(), rationals())
    def test_full_period_is_period_times_mean(self, f, a):
        assert pw_integrate(f, a, a + f.period) == f.period * f.mean

    @given(piecewise_consts(), rationals(), st.integers(0, 5))
    def test_wraps_many_periods(self, f, a, k):
        w = Fraction(1, 3)
        assert pw_integrate(f, a, a + k * f.period + w) == k * f.total + pw_integrate(f, a, a + w)


class TestJson:
    @given(piecewise_consts())
    def test_round_trip(self, f):
        assert PiecewiseConst.from_json(f.to_json()) == f

    def test_rationals_are_strings(self):
        obj = SQUARE.to_json()
        assert obj == {"period": "1/1", "breaks": ["0/1", "1/2", "1/1"], "values": ["1/1", "-1/1"]}


class TestWindowAverage:
    def test_zero_function(self):
        g = window_average_profile(PiecewiseConst.constant(4, 0), Fraction(3, 2))
        assert g.max_value == g.min_value == 0

    def test_nonpositive_window_rejected(self):
        with pytest.raises(ValueError):
            window_average_profile(SQUARE, 0)

    def test_thm2_profile_max(self):
        P = 16
        g = window_average_profile(thm2_profile(P, Fraction(P, 8), Fraction(1, 2)), Fraction(P, 4))
        # a/2 = 2 a d with a = 1/2, d = 1/4
        assert g.max_value == Fraction(1, 4)
        assert level_set_measures(g, g.max_value)[0] == Fraction(P, 8)

    def test_thm2_max_measure_by_brute_scan(self):
        P = 16
        f = thm2_profile(P, Fraction(P, 8), Fraction(1, 2))
        w = Fraction(P, 4)
        res = Fraction(P, 1 << 12)
        hits = sum(1 for k in range(1 << 12) if pw_integrate(f, k * res, k * res + w) / w == Fraction(1, 4))
        assert abs(hits * res - Fraction(P, 8)) <= 2 * res

    @pytest.mark.parametrize("d", [Fraction(1, 4), Fraction(1, 8), Fraction(3, 8), Fraction(1, 16)])
    def test_thm2_level_sets(self, d):
        P = 64
        a = Fraction(1, 2)
        g = window_average_profile(thm2_profile(P, d * P / 2, a), Fraction(P, 4))
        assert level_set_measures(g, 0)[0] == P * (Fraction(1, 2) - d)
        assert level_set_measures(g, -2 * a * d)[0] == P * (Fraction(1, 4) - d / 2)
        assert level_set_measures(g, 2 * a * d)[0] == P * (Fraction(1, 4) - d / 2)

    @given(piecewise_consts())
    def test_window_of_one_period_is_mean(self, f):
        g = window_average_profile(f, f.period)
        assert g.max_value == g.min_value == f.mean

    @given(piecewise_consts(), rationals(16, 0, 3).filter(lambda w: w > 0))
    def test_averaging_does_not_increase_sup(self, f, w):
        g = window_average_profile(f, w)
        assert max(abs(g.max_value), abs(g.min_value)) <= f.sup_abs

    @given(piecewise_consts(), rationals(16, 0, 3).filter(lambda w: w > 0))
    def test_plateaus_plus_ramps_partition_the_period(self, f, w):
        g = window_average_profile(f, w)
        plateau = sum(level_set_measures(g, v)[0] for v in g.plateaus())
        assert plateau + g.ramp_measure() == g.period

    @given(piecewise_consts(), rationals(16, 0, 3).filter(lambda w: w > 0), st.lists(rationals(97, 0, 2), max_size=20))
    def test_matches_direct_integral(self, f, w, ys):
        g = window_average_profile(f, w)
        for y in ys:
            assert g(y) == pw_integrate(f, y, y + w) / w

    def test_matches_direct_integral_on_seeded_points(self):
        f = PiecewiseConst(Fraction(5, 2), (0, Fraction(1, 3), Fraction(7, 5), Fraction(5, 2)), (3, -2, Fraction(1, 7)))
        w = Fraction(4, 3)
        g = window_average_profile(f, w)
        rng = random.Random(11)
        for _ in range(10_000):
            y = Fraction(rng.randrange(0, 10**6), rng.randrange(1, 10**4))
            assert g(y) == pw_integrate(f, y, y + w) / w


class TestLevelSets:
    def test_zero_profile(self):
        g = PiecewiseLinear(Fraction(3), ((Fraction(0), Fraction(0)),))
        assert level_set_measures(g, 0) == (3, 3)

    def test_ge_measure_on_a_ramp(self):
        g = PiecewiseLinear(Fraction(4), ((Fraction(0), Fraction(0)), (Fraction(2), Fraction(2))))
        eq, ge = level_set_measures(g, 1)
        assert eq == 0
        assert ge == 2  # rising half [1, 2] and falling half [2, 3]


class TestCertifiedValue:
    def test_interval(self):
        cv = CertifiedValue(Fraction(-1, 4), Fraction(1, 8))
        assert (cv.lo, cv.hi) == (Fraction(-3, 8), Fraction(-1, 8))
        assert cv.abs_upper == Fraction(3, 8)
        assert cv.abs_lower == Fraction(1, 8)
        assert cv.contains(Fraction(-1, 5))
        assert not cv.contains(0)

    def test_negative_tail_rejected(self):
        with pytest.raises(ValueError):
            CertifiedValue(Fraction(0), Fraction(-1))
