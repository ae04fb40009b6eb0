"""``birkhoff-lab`` command line."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .constructions import FamilyMode, Thm2Schedule, schedule_default, schedule_validate
from .errors import BirkhoffLabError, ConfigInvalid
from .harness import ExperimentConfig, default_config, run
from .phi import PhiSpec
from .rudolph import StageSchedule, stage_schedule_solve


def _emit(obj, out: str | None) -> None:
    text = json.dumps(obj, indent=2) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _phi_from_args(args) -> PhiSpec:
    if args.phi_log is not None:
        return PhiSpec.log_reciprocal(args.phi_log)
    return PhiSpec.power(args.phi_exponent)


def cmd_run(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    result = run(cfg, args.out)
    print(f"{cfg.label}: {len(result.rows)} rows -> {result.csv_path}")
    for v in result.violations:
        print(f"VIOLATION {v}")
    return result.exit_code


def cmd_schedule_gen(args) -> int:
    if args.family == "thm4":
        sched = stage_schedule_solve(args.n, _phi_from_args(args), exponent_cap=args.cap)
        _emit(sched.to_json(), args.out)
    else:
        _emit(schedule_default(args.n, FamilyMode(args.mode)).to_json(), args.out)
    return 0


def cmd_schedule_check(args) -> int:
    try:
        obj = json.loads(Path(args.file).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigInvalid(f"cannot read {args.file}: {exc}") from exc
    if args.family == "thm4":
        sched = StageSchedule.from_json(obj, _phi_from_args(args))
        cert = sched.validate()
        for name, ok in cert["checks"].items():
            print(f"{'PASS' if ok else 'FAIL'} {name}")
        return 0 if all(cert["checks"].values()) else 1
    cert = schedule_validate(Thm2Schedule.from_json(obj), FamilyMode(args.mode))
    for c in cert.checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}{': ' + c.detail if c.detail else ''}")
    return 0 if cert.ok else 1


def cmd_verify(args) -> int:
    cfg = default_config(args.theorem, args.n, args.depth, args.seed)
    result = run(cfg, args.out or ".")
    status = "PASS" if result.exit_code == 0 else "FAIL"
    print(f"{status} {args.theorem}: {len(result.rows)} rows -> {result.csv_path}")
    for v in result.violations:
        print(f"VIOLATION {v}")
    return result.exit_code


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="birkhoff-lab", description="Exact experiments on Birkhoff averages.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment config")
    p.add_argument("config")
    p.add_argument("--out", help="output directory (default: config 'out' or cwd)")
    p.set_defaults(func=cmd_run)

    sch = sub.add_parser("schedule", help="generate or check parameter schedules")
    ssub = sch.add_subparsers(dest="action", required=True)
    for name, func in (("gen", cmd_schedule_gen), ("check", cmd_schedule_check)):
        s = ssub.add_parser(name)
        if name == "check":
            s.add_argument("file")
        s.add_argument("--family", choices=("thm2", "thm4"), default="thm2")
        s.add_argument("--mode", choices=[m.value for m in FamilyMode], default="divergent")
        s.add_argument("--n", type=int, default=6)
        s.add_argument("--phi-exponent", default="-1/4")
        s.add_argument("--phi-log", type=int, default=None, metavar="BASE")
        s.add_argument("--cap", type=int, default=1 << 20, help="largest allowed log2 h_n")
        s.add_argument("--out")
        s.set_defaults(func=func)

    v = sub.add_parser("verify", help="run the built-in check for one theorem")
    v.add_argument("theorem", choices=("thm1", "thm2", "thm3", "thm4"))
    v.add_argument("--n", type=int)
    v.add_argument("--depth", type=int)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--out")
    v.set_defaults(func=cmd_verify)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BirkhoffLabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
