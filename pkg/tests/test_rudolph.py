import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from birkhoff_lab.errors import ConfigInvalid, PhiTooSlow
from birkhoff_lab.phi import PhiSpec
from birkhoff_lab.rudolph import (
    BaseRotation,
    Column,
    RudolphParams,
    RudolphPoint,
    StageSchedule,
    fn_rudolph,
    phi_ratio_experiment,
    plateau_points,
    rudolph_evolve,
    stage_distribution,
    stage_integral,
    stage_schedule_solve,
)

EXAMPLE = RudolphParams.solve(16, Fraction(1, 8), Fraction(3, 64), Fraction(1, 16), Fraction(1, 2))
POWER = PhiSpec.power("-1/4")


def small_step_evolve(pt, t, p, step):
    """Independent route: advance in fixed steps, applying the base map at each roof."""
    rot = BaseRotation.default(p)
    col, x, y = pt.column, pt.x, pt.y
    for _ in range(int(t / step)):
        y += step
        if y >= p.roof(col):
            y -= p.roof(col)
            x = rot(x)
            col = p.column_of(x)
    return RudolphPoint(col, x, y)


class TestParams:
    def test_solved_width(self):
        assert EXAMPLE.d_w == Fraction(2, 129)
        assert EXAMPLE.h * EXAMPLE.c_w + (EXAMPLE.h + EXAMPLE.eps) * EXAMPLE.d_w == 1

    def test_measure_constraint_enforced(self):
        with pytest.raises(ConfigInvalid):
            RudolphParams(16, Fraction(1, 8), Fraction(3, 64), Fraction(1, 64), Fraction(1, 16), 1)

    def test_delta_range(self):
        with pytest.raises(ConfigInvalid):
            RudolphParams.solve(16, Fraction(1, 8), Fraction(3, 64), Fraction(1, 4), 1)

    def test_json_round_trip(self):
        assert RudolphParams.from_json(EXAMPLE.to_json()) == EXAMPLE

    def test_bad_json(self):
        with pytest.raises(ConfigInvalid):
            RudolphParams.from_json({"h": "16"})


class TestFlow:
    def test_profile_values(self):
        h = EXAMPLE.h
        assert fn_rudolph(0, EXAMPLE) == EXAMPLE.a
        assert fn_rudolph(h / 2, EXAMPLE) == -EXAMPLE.a
        assert fn_rudolph(7 * h / 8, EXAMPLE) == 0

    def test_no_crossing(self):
        pt = RudolphPoint(Column.SHORT, Fraction(1, 64), Fraction(3))
        assert rudolph_evolve(pt, 5, EXAMPLE) == RudolphPoint(Column.SHORT, Fraction(1, 64), Fraction(8))
        assert rudolph_evolve(pt, 0, EXAMPLE) == pt

    def test_one_crossing_from_short_top(self):
        pt = RudolphPoint(Column.SHORT, Fraction(1, 64), Fraction(15))
        out = rudolph_evolve(pt, 3, EXAMPLE)
        assert out.y == 15 + 3 - EXAMPLE.h
        assert out == small_step_evolve(pt, 3, EXAMPLE, Fraction(1, 8))

    @settings(max_examples=40)
    @given(st.integers(0, 255), st.integers(0, 127), st.integers(1, 400))
    def test_matches_small_steps(self, i, j, k):
        x = EXAMPLE.width * Fraction(i, 256)
        col = EXAMPLE.column_of(x)
        pt = RudolphPoint(col, x, EXAMPLE.roof(col) * Fraction(j, 128))
        step = Fraction(1, 128)
        assert rudolph_evolve(pt, k * step * 16, EXAMPLE) == small_step_evolve(pt, k * step * 16, EXAMPLE, step)

    def test_plateau_value(self):
        pt = RudolphPoint(Column.SHORT, Fraction(0), EXAMPLE.delta * EXAMPLE.h)
        assert stage_integral(pt, EXAMPLE.t, EXAMPLE) / EXAMPLE.t == EXAMPLE.a

    def test_full_column_integral_vanishes(self):
        for col, x in ((Column.SHORT, Fraction(0)), (Column.TALL, EXAMPLE.c_w)):
            pt = RudolphPoint(col, x, Fraction(0))
            assert stage_integral(pt, EXAMPLE.roof(col), EXAMPLE) == 0


class TestDistribution:
    def test_example_identities(self):
        dist = stage_distribution(EXAMPLE)
        assert dist.identity_holds
        assert dist.strict_lower_holds
        assert dist.symmetric
        assert dist.total == 1

    def test_brute_force_plateau_measure(self):
        p = EXAMPLE
        res = 1 << 10
        hits = Fraction(0)
        for col, x, w in ((Column.SHORT, Fraction(0), p.c_w), (Column.TALL, p.c_w, p.d_w)):
            top = p.roof(col) - p.t
            step = p.roof(col) / res
            n = 0
            for k in range(res):
                y = k * step
                if y >= top:
                    break
                v = stage_integral(RudolphPoint(col, x, y), p.t, p) / p.t
                n += abs(v) == p.a
            hits += w * n * step
        assert abs(hits - stage_distribution(p).m_D) <= 4 * p.width * p.h / res

    @settings(max_examples=30)
    @given(st.integers(4, 12), st.integers(1, 8), st.integers(1, 15), st.integers(1, 31))
    def test_identity_for_random_params(self, e, eps_den, c_num, delta_num):
        h = Fraction(1 << e)
        eps = Fraction(1, eps_den)
        c_w = Fraction(c_num, 16) / h
        p = RudolphParams.solve(h, eps, c_w, Fraction(delta_num, 256), Fraction(1, 3))
        dist = stage_distribution(p)
        assert dist.identity_holds
        assert dist.strict_lower_holds
        assert dist.total == 1


class TestSolver:
    def test_power_three_stages(self):
        s = stage_schedule_solve(3, POWER)
        assert s.ok
        exps = [x.h.numerator.bit_length() - 1 for x in s.stages]
        assert exps == [5, 33, 69]
        assert s.condition_I() < 1

    def test_single_stage_always_solvable(self):
        for phi in (POWER, PhiSpec.log_reciprocal(2)):
            assert len(stage_schedule_solve(1, phi)) == 1

    def test_log_rate_needs_huge_columns(self):
        with pytest.raises(PhiTooSlow):
            stage_schedule_solve(4, PhiSpec.log_reciprocal(2), exponent_cap=10**6)

    def test_zero_stages_rejected(self):
        with pytest.raises(ValueError):
            stage_schedule_solve(0, POWER)

    def test_json_round_trip(self):
        s = stage_schedule_solve(2, POWER)
        back = StageSchedule.from_json(s.to_json(), POWER)
        assert back.stages == s.stages

    def test_earlier_bound_dominated(self):
        s = stage_schedule_solve(3, POWER)
        for n in (2, 3):
            hs = sum(x.h for x in s.stages[: n - 1])
            assert s.earlier_bound(n) <= 2 * s[1].a * hs / (s[n].h * s[n].delta)


class TestPhiRatio:
    def test_single_stage_ratio(self):
        s = stage_schedule_solve(1, POWER)
        rep = phi_ratio_experiment(s, POWER, points_per_stage=4)
        row = rep.rows[0]
        target = math.log2(float(s[1].a)) - POWER.log2(s[1].t)
        assert row.log2_ratio_lo <= target <= row.log2_ratio_hi

    def test_growth(self):
        s = stage_schedule_solve(3, POWER)
        rep = phi_ratio_experiment(s, POWER)
        assert rep.strictly_increasing
        assert all(g >= math.log2(10) for g in rep.growth_log2())

    def test_zero_samples(self):
        assert phi_ratio_experiment(stage_schedule_solve(1, POWER), POWER, points_per_stage=0).rows == []

    def test_plateau_points_stay_inside_band(self):
        for pt in plateau_points(EXAMPLE, 50, seed=3):
            pt.validate(EXAMPLE)
            assert pt.y + EXAMPLE.t <= EXAMPLE.h / 4
