from fractions import Fraction

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from birkhoff_lab.core import Dyadic, PiecewiseConst
from birkhoff_lab.odometer import SquarePoint

settings.register_profile("lab", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("lab")

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def acceptance_log():
    return ACCEPTANCE_LINES


def rationals(max_den: int = 64, lo: int = -4, hi: int = 4):
    return st.builds(
        lambda n, d: Fraction(n, d),
        st.integers(lo * max_den, hi * max_den),
        st.integers(1, max_den),
    )


def dyadics_unit(max_exp: int = 24):
    return st.integers(0, max_exp).flatmap(
        lambda e: st.integers(0, (1 << e) - 1).map(lambda m: Dyadic(m, e))
    )


def square_points(max_exp: int = 24):
    return st.builds(
        SquarePoint,
        dyadics_unit(max_exp),
        st.integers(0, max_exp).flatmap(lambda e: st.integers(0, (1 << e) - 1).map(lambda m: Fraction(m, 1 << e))),
    )


@st.composite
def piecewise_consts(draw, period=None, zero_mean=False, max_pieces=6):
    P = period if period is not None else draw(st.sampled_from([Fraction(1), Fraction(2), Fraction(3, 2), Fraction(8)]))
    k = draw(st.integers(1, max_pieces))
    cuts = sorted(set(draw(st.lists(st.integers(1, 63), min_size=k - 1, max_size=k - 1))))
    breaks = [Fraction(0)] + [P * Fraction(c, 64) for c in cuts] + [P]
    values = [draw(rationals(8, -3, 3)) for _ in range(len(breaks) - 1)]
    f = PiecewiseConst(P, tuple(breaks), tuple(values))
    if zero_mean:
        f = f + PiecewiseConst.constant(P, -f.mean)
    return f
