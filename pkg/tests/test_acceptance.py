"""End-to-end acceptance checks, one PASS/FAIL line per criterion."""

import math
import random
import time
from fractions import Fraction

import pytest

from birkhoff_lab.constructions import (
    FamilyMode,
    schedule_default,
    thm2_distribution,
    thm2_rate_sweep,
    vanish_check_earlier_terms,
)
from birkhoff_lab.core import Dyadic
from birkhoff_lab.flows import birkhoff_avg_rotation
from birkhoff_lab.harness import ExperimentConfig, default_config, run, run_config, square_wave
from birkhoff_lab.odometer import induced_interval_map, is_single_cycle, odometer_pow, odometer_step
from birkhoff_lab.phi import PhiSpec
from birkhoff_lab.rudolph import phi_ratio_experiment, stage_distribution, stage_schedule_solve
from birkhoff_lab.sampling import dyadic_points
from birkhoff_lab.torus import CFNumber, TorusSeries, TorusStage, thm3_experiment

from conftest import ACCEPTANCE_LINES

pytestmark = pytest.mark.acceptance

POWER = PhiSpec.power("-1/4")
TORUS_STAGES = [
    TorusStage(2, Fraction(1), Fraction(1, 64)),
    TorusStage(4, Fraction(1, 12), Fraction(1, 16)),
    TorusStage(6, Fraction(1, 600), Fraction(1, 16)),
]


def record(label, ok, detail):
    ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'} {label}: {detail}")
    assert ok, detail


def test_1_rotation_maximal_rate():
    start = time.perf_counter()
    f = square_wave()
    norm = f.abs_integral
    rng = random.Random(1)
    worst = Fraction(0)
    bad_bound = bad_zero = 0
    for _ in range(10_000):
        x = Fraction(rng.getrandbits(20), 1 << 20)
        t = Fraction(rng.randrange(1, (1 << 30) + 1), 1 << 10)
        a = birkhoff_avg_rotation(f, t, x)
        bad_bound += abs(a) > norm / t
        worst = max(worst, abs(a) * t / norm)
        n = max(1, math.floor(t))
        bad_zero += birkhoff_avg_rotation(f, n, x) != 0
    elapsed = time.perf_counter() - start
    ok = bad_bound == 0 and bad_zero == 0 and elapsed < 10
    record("1 rotation rate", ok, f"bound violations {bad_bound}, nonzero integer-time averages {bad_zero}, "
           f"max |A| t/||f||_1 = {float(worst):.4f}, {elapsed:.2f}s")


def test_2_odometer_structure():
    start = time.perf_counter()
    cycles = all(is_single_cycle(induced_interval_map(n)) for n in range(0, 13))
    rng = random.Random(2)
    fixes = True
    for n in range(0, 13):
        for _ in range(200):
            x = Dyadic(rng.getrandbits(40), 40)
            y = odometer_pow(x, 1 << n)
            fixes &= all(y.digit(i) == x.digit(i) for i in range(1, n + 1))
        # digit rule applied 2^n times, independent of the digit-integer shortcut
        x = Dyadic(rng.getrandbits(n + 6), n + 6)
        y = x
        for _ in range(1 << n):
            y = odometer_step(y)
        fixes &= all(y.digit(i) == x.digit(i) for i in range(1, n + 1))
    elapsed = time.perf_counter() - start
    record("2 odometer structure", cycles and fixes and elapsed < 5,
           f"single cycles n<=12: {cycles}, S^(2^n) fixes first n digits: {fixes}, {elapsed:.2f}s")


def test_3_uniform_rate():
    start = time.perf_counter()
    res = run_config(default_config("thm1"))
    elapsed = time.perf_counter() - start
    slope = res.summary.get("slope", float("nan"))
    ok = not res.violations and -1.05 <= slope <= -0.95 and elapsed < 60
    record("3 uniform 1/t rate", ok, f"violations {len(res.violations)}, slope {slope:.4f}, "
           f"{res.summary['points']} points x {res.summary['times']} times, {elapsed:.1f}s")


@pytest.fixture(scope="module")
def sched():
    return schedule_default(5, FamilyMode.DIVERGENT)


class TestCriterion4:
    N = 5

    def test_4a_earlier_terms_vanish(self, sched):
        start = time.perf_counter()
        pts = dyadic_points(100, 64, 4)
        ok = all(vanish_check_earlier_terms(sched, n, pts) for n in range(1, self.N + 1))
        elapsed = time.perf_counter() - start
        record("4a earlier terms vanish", ok and elapsed < 60, f"n=1..5 at 100 points, {elapsed:.2f}s")

    def test_4b_distribution(self, sched):
        ok = True
        for n in range(1, self.N + 1):
            d = thm2_distribution(sched, n)
            dn = sched[n].d
            ok &= d.measure_zero == Fraction(1, 2) - dn
            ok &= d.measure_max == d.measure_min == Fraction(1, 4) - dn / 2
        record("4b distribution measures", ok, "exact (1/2 - d, 1/4 - d/2, 1/4 - d/2) for n=1..5")

    def test_4c_ratio_bound(self, sched):
        start = time.perf_counter()
        pts = dyadic_points(200, 64, 4)
        rep = thm2_rate_sweep(sched, range(1, self.N + 1), pts)
        ratios = [Fraction(r.sup_abs) / (sched[r.index].a * sched[r.index].d) for r in rep.rows]
        ok = all(q <= 2 + sched.eta(n) for n, q in enumerate(ratios, 1))
        elapsed = time.perf_counter() - start
        record("4c sup ratio <= 2 + eta_n", ok and elapsed < 60,
               "ratios " + ", ".join(f"{float(q):.4f}" for q in ratios) + f", {elapsed:.2f}s")

    def test_4c_eta_small(self, sched):
        etas = [sched.eta(n) for n in range(1, self.N + 1)]
        ok = all(e <= Fraction(2, 4**n) for n, e in enumerate(etas, 1))
        detail = ", ".join(f"eta_{n}/2^(1-2n) = {float(e * 4**n / 2):.6f}" for n, e in enumerate(etas, 1))
        record("4c eta_n <= 2^(1-2n)", ok, detail)


def test_5_stage_claims():
    start = time.perf_counter()
    sched = stage_schedule_solve(3, POWER)
    dists = [stage_distribution(s) for s in sched.stages]
    exact = all(d.identity_holds and d.strict_lower_holds for d in dists)
    rep = phi_ratio_experiment(sched, POWER)
    growth = rep.growth_log2()
    grows = rep.strictly_increasing and all(g >= math.log2(10) for g in growth)
    elapsed = time.perf_counter() - start
    record("5 stage measures and phi-ratio", exact and grows and sched.ok and elapsed < 120,
           f"identity and lower bound: {exact}, growth x" + ", x".join(f"{2**g:.1f}" for g in growth)
           + f", {elapsed:.2f}s")


def test_6_torus():
    start = time.perf_counter()
    series = TorusSeries(CFNumber((10, 100, 1000, 10000)), TORUS_STAGES)
    rep = thm3_experiment(series, POWER, points_per_stage=16)
    band = all(r.in_band(0.9, 1.1) for r in rep.rows)
    growth = rep.growth_log2()
    grows = rep.strictly_increasing and all(g >= math.log2(5) for g in growth)
    residual = max(
        float(abs(term.column_integral_quadrature(term.box.width * term.box.mpf(Fraction(i, 7)))))
        for term in series.terms
        for i in range(7)
    )
    elapsed = time.perf_counter() - start
    ok = band and grows and rep.earlier_ok and residual <= 1e-12 and elapsed < 120
    bands = ", ".join(f"[{r.lower / r.a:.4f}, {r.sup_abs / r.a:.4f}]" for r in rep.rows)
    record("6 torus slow averages", ok, f"|A|/a_n in {bands}, growth x"
           + ", x".join(f"{2**g:.1f}" for g in growth) + f", column residual {residual:.1e}, {elapsed:.2f}s")


def test_7_oracle_equivalence():
    start = time.perf_counter()
    res = run_config(ExperimentConfig.from_json({"kind": "oracle-compare", "points": {"count": 50}, "step_exp": 14}))
    elapsed = time.perf_counter() - start
    record("7 oracle equivalence", not res.violations and len(res.rows) == 50 and elapsed < 60,
           f"{len(res.rows)} instances, violations {len(res.violations)}, {elapsed:.2f}s")


DETERMINISM_CONFIGS = [
    {"kind": "rotation-bound", "points": {"count": 200, "depth": 20}, "seed": 1},
    default_config("thm1").to_json(),
    default_config("thm2").to_json(),
    {"kind": "thm4-stage", "n": 3},
    default_config("thm4").to_json(),
    default_config("thm3").to_json(),
    {"kind": "oracle-compare", "points": {"count": 50}, "step_exp": 14},
]


def test_8_determinism(tmp_path):
    mismatched = []
    for i, cfg in enumerate(DETERMINISM_CONFIGS):
        a = run(cfg, tmp_path / f"a{i}")
        b = run(cfg, tmp_path / f"b{i}")
        if a.csv_path.read_bytes() != b.csv_path.read_bytes():
            mismatched.append(cfg["kind"])
    record("8 determinism", not mismatched,
           f"{len(DETERMINISM_CONFIGS)} configs run twice, mismatches: {mismatched or 'none'}")
