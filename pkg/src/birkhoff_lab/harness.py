"""Experiment configs, runners and report files.

A config is a JSON object with a ``kind`` plus kind-specific fields. Every
runner returns rows for one CSV and a JSON-ready summary; :func:`run` writes
both and reports the violations that decide the exit status.
"""

from __future__ import annotations

import csv
import io
import json
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable

from .constructions import (
    FamilyMode,
    Thm2Schedule,
    schedule_default,
    schedule_validate,
    series_from_schedule,
    thm1_uniform_bound_sweep,
    thm2_distribution,
    thm2_rate_sweep,
    two_piece_series,
    vanish_check_earlier_terms,
)
from .core import Dyadic, PiecewiseConst, fmt_rat, rat
from .errors import BoundViolated, ConfigInvalid, DegenerateFit
from .flows import SeriesFunction, TowerFunction, birkhoff_avg_rotation, birkhoff_avg_tower_exact
from .odometer import SquarePoint
from .oracles import orbit_total_variation, riemann_integral
from .phi import PhiSpec
from .rates import rate_fit
from .rudolph import RudolphParams, StageSchedule, phi_ratio_experiment, stage_distribution, stage_schedule_solve
from .sampling import dyadic_grid, dyadic_points, geometric_odd_times
from .torus import DEFAULT_DPS, CFNumber, TorusSeries, TorusStage, thm3_experiment

__all__ = ["KINDS", "ExperimentConfig", "RunResult", "run", "run_config", "default_config", "square_wave"]

KINDS = ("rotation-bound", "thm1", "thm2", "thm4-stage", "thm4-ratio", "thm3", "oracle-compare")


def square_wave() -> PiecewiseConst:
    return PiecewiseConst(Fraction(1), (Fraction(0), Fraction(1, 2), Fraction(1)), (Fraction(1), Fraction(-1)))


@dataclass
class ExperimentConfig:
    kind: str
    seed: int = 0
    points: dict = field(default_factory=lambda: {"count": 100, "depth": 30})
    times: dict | None = None
    schedule: Any = None
    phi: dict | None = None
    n: int | None = None
    params: dict | None = None
    truncation: int | None = None
    out: str | None = None
    name: str | None = None
    extra: dict = field(default_factory=dict)

    _KNOWN = ("kind", "seed", "points", "times", "schedule", "phi", "n", "params", "truncation", "out", "name")

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentConfig":
        if not isinstance(obj, dict) or "kind" not in obj:
            raise ConfigInvalid("config must be an object with a 'kind'")
        if obj["kind"] not in KINDS:
            raise ConfigInvalid(f"unknown experiment kind {obj['kind']!r}")
        known = {k: obj[k] for k in cls._KNOWN if k in obj}
        extra = {k: v for k, v in obj.items() if k not in cls._KNOWN}
        try:
            cfg = cls(**known, extra=extra)
            cfg.seed = int(cfg.seed)
        except (TypeError, ValueError) as exc:
            raise ConfigInvalid(str(exc)) from exc
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        try:
            obj = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigInvalid(f"cannot read config {path}: {exc}") from exc
        cfg = cls.from_json(obj)
        cfg.extra.setdefault("_base_dir", str(Path(path).resolve().parent))
        return cfg

    def to_json(self) -> dict:
        obj = {k: getattr(self, k) for k in self._KNOWN if getattr(self, k) is not None}
        obj.update({k: v for k, v in self.extra.items() if not k.startswith("_")})
        return obj

    @property
    def label(self) -> str:
        return self.name or self.kind


@dataclass
class RunResult:
    rows: list[list]
    header: list[str]
    summary: dict
    violations: list[str]
    csv_path: Path | None = None
    summary_path: Path | None = None

    @property
    def exit_code(self) -> int:
        return 1 if self.violations else 0

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        w.writerows(self.rows)
        return buf.getvalue()


def _square_points(cfg: ExperimentConfig) -> list[SquarePoint]:
    spec = cfg.points or {}
    if "explicit" in spec:
        return [SquarePoint(Dyadic.parse(str(x)), rat(y)) for x, y in spec["explicit"]]
    if "grid_depth" in spec:
        return dyadic_grid(int(spec["grid_depth"]))
    return dyadic_points(int(spec.get("count", 100)), int(spec.get("depth", 30)), cfg.seed)


def _times(cfg: ExperimentConfig, default: list[Fraction]) -> list[Fraction]:
    spec = cfg.times
    if spec is None:
        return default
    if "list" in spec:
        return [rat(str(t)) for t in spec["list"]]
    if "odd_geometric" in spec:
        g = spec["odd_geometric"]
        return geometric_odd_times(int(g["lo_exp"]), int(g["hi_exp"]), int(g["count"]))
    raise ConfigInvalid("times needs 'list' or 'odd_geometric'")


def _thm2_schedule(cfg: ExperimentConfig, mode: FamilyMode, default_n: int) -> Thm2Schedule:
    spec = cfg.schedule
    if spec is None or (isinstance(spec, dict) and "default" in spec):
        n = int((spec or {}).get("default", {}).get("N", default_n)) if spec else default_n
        return schedule_default(n, mode)
    if isinstance(spec, dict) and "file" in spec:
        base = Path(cfg.extra.get("_base_dir", "."))
        try:
            spec = json.loads((base / spec["file"]).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigInvalid(f"cannot read schedule: {exc}") from exc
    return Thm2Schedule.from_json(spec)


def _phi(cfg: ExperimentConfig) -> PhiSpec:
    return PhiSpec.from_json(cfg.phi or {"kind": "power", "exponent": "-1/4"})


def _rate_rows(report) -> tuple[list[str], list[list]]:
    text = report.to_csv().splitlines()
    rows = list(csv.reader(text))
    return rows[0], rows[1:]


def run_rotation_bound(cfg: ExperimentConfig) -> RunResult:
    f = PiecewiseConst.from_json(cfg.params) if cfg.params else square_wave()
    if f.period != 1:
        raise ConfigInvalid("rotation function must have period 1")
    norm = f.abs_integral
    depth = int((cfg.points or {}).get("grid_depth", (cfg.points or {}).get("depth", 10)))
    xs = [Fraction(i, 1 << depth) for i in range(1 << depth)] if "grid_depth" in (cfg.points or {}) else [
        p.x.to_fraction() for p in _square_points(cfg)
    ]
    times = _times(cfg, [Fraction(k, 8) for k in range(1, 65)])
    header = ["t", "sup_abs_num", "sup_abs_den", "bound_num", "bound_den", "ratio_float"]
    rows, violations = [], []
    for t in times:
        sup = max((abs(birkhoff_avg_rotation(f, t, x)) for x in xs), default=Fraction(0))
        bound = norm / t
        if sup > bound:
            violations.append(f"t={fmt_rat(t)}: sup|A| = {fmt_rat(sup)} > {fmt_rat(bound)}")
        if t.denominator == 1 and f.mean == 0 and sup != 0:
            violations.append(f"t={fmt_rat(t)}: nonzero average at integer time")
        rows.append([fmt_rat(t), sup.numerator, sup.denominator, bound.numerator, bound.denominator,
                     repr(float(sup / bound)) if bound else "0.0"])
    return RunResult(rows, header, {"points": len(xs), "times": len(times)}, violations)


def run_thm1(cfg: ExperimentConfig) -> RunResult:
    N = int(cfg.n or 6)
    if cfg.extra.get("family") == "two-piece":
        f = two_piece_series(N)
    else:
        sched = _thm2_schedule(cfg, FamilyMode.CONVERGENT, N)
        f = series_from_schedule(sched)
        cert = schedule_validate(sched, FamilyMode.CONVERGENT)
        if not cert.ok:
            raise ConfigInvalid("schedule fails validation: " + "; ".join(c.name for c in cert.violations))
    points = _square_points(cfg)
    times = _times(cfg, geometric_odd_times(4, 20, 30))
    violations = []
    summary: dict = {"points": len(points), "times": len(times), "infty1_total": fmt_rat(f.infty1_total())}
    try:
        report = thm1_uniform_bound_sweep(f, times, points, fit=False)
    except BoundViolated as exc:
        t, p, cv = exc.witness
        violations.append(f"t={fmt_rat(t)} at ({p.x}, {fmt_rat(p.y)}): |A| <= {fmt_rat(cv.abs_upper)}")
        return RunResult([], ["t"], summary, violations)
    if points:
        try:
            fit = rate_fit([(float(r.index), float(r.sup_exact)) for r in report.rows])
            summary["slope"] = fit.slope
            summary["slope_stderr"] = fit.stderr
        except DegenerateFit as exc:
            summary["fit_excluded"] = exc.excluded
    header, rows = _rate_rows(report)
    return RunResult(rows, header, summary, violations)


def run_thm2(cfg: ExperimentConfig) -> RunResult:
    N = int(cfg.n or 5)
    sched = _thm2_schedule(cfg, FamilyMode.DIVERGENT, N)
    cert = schedule_validate(sched, FamilyMode.DIVERGENT)
    if not cert.ok:
        raise ConfigInvalid("schedule fails validation: " + "; ".join(c.name for c in cert.violations))
    points = _square_points(cfg)
    ns = list(range(1, len(sched) + 1))
    violations = []
    summary: dict = {"points": len(points), "stages": len(ns)}
    vanish = {}
    for n in ns:
        res = vanish_check_earlier_terms(sched, n, points)
        vanish[n] = res.ok
        if not res.ok:
            violations.append(f"n={n}: earlier terms do not vanish")
    summary["vanish"] = vanish
    summary["distribution"] = {
        n: {k: fmt_rat(v) for k, v in vars(thm2_distribution(sched, n)).items() if k != "n"} for n in ns
    }
    try:
        report = thm2_rate_sweep(sched, ns, points)
    except BoundViolated as exc:
        violations.append(f"bound violated: {exc}")
        return RunResult([], ["n"], summary, violations)
    header, rows = _rate_rows(report)
    summary["eta"] = {n: fmt_rat(sched.eta(n)) for n in ns}
    return RunResult(rows, header, summary, violations)


def _stage_params(cfg: ExperimentConfig) -> list[RudolphParams]:
    if cfg.params:
        plist = cfg.params if isinstance(cfg.params, list) else [cfg.params]
        return [RudolphParams.from_json(p) for p in plist]
    return stage_schedule_solve(int(cfg.n or 3), _phi(cfg)).stages


def run_thm4_stage(cfg: ExperimentConfig) -> RunResult:
    header = ["n", "plus", "minus", "zero", "ramps", "exceptional", "m_D", "m_D_formula", "m_D_lower"]
    rows, violations = [], []
    for n, p in enumerate(_stage_params(cfg), 1):
        d = stage_distribution(p)
        rows.append([n] + [fmt_rat(getattr(d, k)) for k in header[1:]])
        if not d.identity_holds:
            violations.append(f"stage {n}: m(D) identity fails")
        if not d.strict_lower_holds:
            violations.append(f"stage {n}: m(D) lower bound fails")
        if not d.symmetric:
            violations.append(f"stage {n}: value distribution not symmetric")
        if d.total != 1:
            violations.append(f"stage {n}: partition does not add up to 1")
    return RunResult(rows, header, {"stages": len(rows)}, violations)


def run_thm4_ratio(cfg: ExperimentConfig) -> RunResult:
    phi = _phi(cfg)
    if cfg.params:
        sched = StageSchedule(_stage_params(cfg), Fraction(0), phi)
    else:
        sched = stage_schedule_solve(int(cfg.n or 3), phi, **cfg.extra.get("solver", {}))
    if not sched.ok:
        raise ConfigInvalid("stage schedule fails validation")
    count = int((cfg.points or {}).get("count", 8))
    report = phi_ratio_experiment(sched, phi, count, cfg.seed)
    growth = float(cfg.extra.get("min_growth", 1))
    header = ["n", "log2_h", "log2_t", "value_num", "value_den", "slack_float", "log2_ratio_lo", "log2_ratio_hi"]
    rows = [
        [r.n, sched[r.n].h.numerator.bit_length() - 1, repr(r.log2_t), r.value.numerator, r.value.denominator,
         repr(float(r.slack)), repr(r.log2_ratio_lo), repr(r.log2_ratio_hi)]
        for r in report.rows
    ]
    violations = []
    for n, g in enumerate(report.growth_log2(), 2):
        if not g > 0:
            violations.append(f"stage {n}: ratio not strictly above stage {n - 1}")
        elif g < math.log2(growth):
            violations.append(f"stage {n}: growth 2^{g:.3f} below {growth}")
    summary = {"phi": phi.to_json(), "growth_log2": report.growth_log2(), "schedule": sched.to_json()}
    return RunResult(rows, header, summary, violations)


def _torus_series(cfg: ExperimentConfig) -> TorusSeries:
    cf = CFNumber.from_json(cfg.extra.get("cf", {"quotients": [10, 100, 1000, 10000]}))
    stages = cfg.params or [
        {"k": 2, "a": "1", "delta": "1/64"},
        {"k": 4, "a": "1/12", "delta": "1/16"},
        {"k": 6, "a": "1/600", "delta": "1/16"},
    ]
    return TorusSeries(cf, [TorusStage.from_json(s) for s in stages], int(cfg.extra.get("dps", DEFAULT_DPS)))


def run_thm3(cfg: ExperimentConfig) -> RunResult:
    series = _torus_series(cfg)
    phi = _phi(cfg)
    cert = series.certificate(phi=phi)
    if not all(cert["checks"].values()):
        raise ConfigInvalid("torus schedule fails: " + ", ".join(k for k, v in cert["checks"].items() if not v))
    report = thm3_experiment(series, phi, int((cfg.points or {}).get("count", 16)), cfg.seed)
    lo, hi = (float(v) for v in cfg.extra.get("band", (0.9, 1.1)))
    growth = float(cfg.extra.get("min_growth", 1))
    violations = []
    for r in report.rows:
        if not r.in_band(lo, hi):
            violations.append(f"stage {r.n}: [{r.lower!r}, {r.sup_abs!r}] not inside a_n*[{lo}, {hi}]")
        if r.earlier_measured > r.earlier_bound:
            violations.append(f"stage {r.n}: earlier terms exceed their bound")
    for n, g in enumerate(report.growth_log2(), 2):
        if not g > 0 or g < math.log2(growth):
            violations.append(f"stage {n}: ratio growth 2^{g:.3f} below {growth}")
    rows = list(csv.reader(report.to_csv().splitlines()))
    return RunResult(rows[1:], rows[0], {"growth_log2": report.growth_log2(), "certificate": _jsonable(cert)},
                     violations)


def _oracle_terms() -> list[TowerFunction]:
    sched = schedule_default(1, FamilyMode.DIVERGENT)
    return [series_from_schedule(sched).terms[0], *two_piece_series(2).terms]


def run_oracle_compare(cfg: ExperimentConfig) -> RunResult:
    count = int((cfg.points or {}).get("count", 50))
    depth = int((cfg.points or {}).get("depth", 30))
    step_exp = int(cfg.extra.get("step_exp", 14))
    max_t_exp = int(cfg.extra.get("max_t_exp", 6))
    terms = _oracle_terms()
    rng = random.Random(cfg.seed)
    header = ["instance", "level", "x", "y", "t", "exact_num", "exact_den", "oracle_num", "oracle_den",
              "bound_num", "bound_den", "diff_float"]
    rows, violations = [], []
    for i in range(count):
        term = terms[i % len(terms)]
        p = SquarePoint(Dyadic(rng.getrandbits(depth), depth), Fraction(rng.getrandbits(depth), 1 << depth))
        t = Fraction(rng.randrange(1, (1 << (max_t_exp + step_exp)) + 1), 1 << step_exp)
        exact = birkhoff_avg_tower_exact(SeriesFunction((term,)), t, p).exact * t
        oracle = riemann_integral(term, p, t, step_exp)
        bound = orbit_total_variation(term, p, t) / (1 << step_exp)
        diff = abs(exact - oracle)
        if diff > bound:
            violations.append(f"instance {i}: |exact - oracle| = {float(diff)!r} > {float(bound)!r}")
        rows.append([i, term.level, str(p.x), fmt_rat(p.y), fmt_rat(t), exact.numerator, exact.denominator,
                     oracle.numerator, oracle.denominator, bound.numerator, bound.denominator, repr(float(diff))])
    return RunResult(rows, header, {"instances": count, "step_exp": step_exp}, violations)


RUNNERS: dict[str, Callable[[ExperimentConfig], RunResult]] = {
    "rotation-bound": run_rotation_bound,
    "thm1": run_thm1,
    "thm2": run_thm2,
    "thm4-stage": run_thm4_stage,
    "thm4-ratio": run_thm4_ratio,
    "thm3": run_thm3,
    "oracle-compare": run_oracle_compare,
}


def _jsonable(obj):
    if isinstance(obj, Fraction):
        return fmt_rat(obj)
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and obj != obj:
        return None
    if isinstance(obj, float) and obj in (float("inf"), float("-inf")):
        return str(obj)
    return obj


def run_config(cfg: ExperimentConfig) -> RunResult:
    """Run without touching the filesystem."""
    result = RUNNERS[cfg.kind](cfg)
    result.summary = _jsonable(
        {"kind": cfg.kind, "seed": cfg.seed, "config": cfg.to_json(), **result.summary,
         "rows": len(result.rows), "violations": result.violations}
    )
    return result


def run(cfg: ExperimentConfig | dict | str | Path, out_dir: str | Path | None = None) -> RunResult:
    """Run a config and write ``<label>.csv`` and ``<label>.summary.json``."""
    if isinstance(cfg, (str, Path)):
        cfg = ExperimentConfig.load(cfg)
    elif isinstance(cfg, dict):
        cfg = ExperimentConfig.from_json(cfg)
    result = run_config(cfg)
    out = Path(out_dir or cfg.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    result.csv_path = out / f"{cfg.label}.csv"
    result.summary_path = out / f"{cfg.label}.summary.json"
    result.csv_path.write_text(result.csv_text())
    result.summary_path.write_text(json.dumps(result.summary, indent=2, sort_keys=True) + "\n")
    return result


def default_config(kind: str, n: int | None = None, depth: int | None = None, seed: int = 0) -> ExperimentConfig:
    """Acceptance-scale configs used by ``verify``."""
    if kind == "thm1":
        return ExperimentConfig("thm1", seed, {"count": 1000, "depth": depth or 30},
                                {"odd_geometric": {"lo_exp": 4, "hi_exp": 20, "count": 30}}, n=n or 6)
    if kind == "thm2":
        return ExperimentConfig("thm2", seed, {"count": 100, "depth": depth or 40}, n=n or 5)
    if kind == "thm3":
        return ExperimentConfig("thm3", seed, {"count": 16}, phi={"kind": "power", "exponent": "-1/4"},
                                extra={"min_growth": 5})
    if kind == "thm4":
        return ExperimentConfig("thm4-ratio", seed, {"count": 8}, phi={"kind": "power", "exponent": "-1/4"},
                                n=n or 3, extra={"min_growth": 10})
    raise ConfigInvalid(f"no default config for {kind!r}")
