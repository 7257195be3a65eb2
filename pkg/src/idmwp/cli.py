"""Command-line front end: ``run``, ``compare``, ``sweep``, ``bounds``, ``list-scenarios``."""

from __future__ import annotations

import argparse
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path
from typing import Optional, Sequence

from .analysis import check_invariants, classify_run, compute_bounds, compute_metrics, epsilon_sweep
from .configio import ConfigError, load_config, write_series, write_table
from .integrator import TerminationKind, Trajectory, integrate
from .scenarios import COMPARE_VARIANTS, builtin_scenarios, compare_cases
from .types import InvalidScenario, Scenario, Variant

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DIVERGED = 2
EXIT_ABORTED = 3

_EXIT_BY_TERMINATION = {
    TerminationKind.COMPLETED: EXIT_OK,
    TerminationKind.BLOWUP: EXIT_DIVERGED,
    TerminationKind.GAP_COLLAPSE: EXIT_DIVERGED,
    TerminationKind.LEADER_VELOCITY_NEGATIVE: EXIT_ABORTED,
    TerminationKind.STEP_LIMIT_REACHED: EXIT_ABORTED,
}

DEFAULT_COMPARE_VARIANTS = (
    "acceleration-projected",
    "velocity-regularized",
    "distance-regularized",
    "discontinuous",
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def exit_code(kind: TerminationKind) -> int:
    return _EXIT_BY_TERMINATION[kind]


def resolve_scenario(ref: str) -> Scenario:
    """A builtin or comparison case name, or a path to a config file."""
    known = {**builtin_scenarios(), **compare_cases()}
    if ref in known:
        return known[ref]
    path = Path(ref)
    if path.is_file():
        return load_config(path)
    raise UsageError(f"unknown scenario {ref!r}: not a builtin name and no such file")


def _variant_for(name: str, s: Scenario):
    key = name.strip().lower()
    if key not in COMPARE_VARIANTS:
        raise UsageError(f"unknown variant {name!r} (choose from {', '.join(v.value for v in Variant)})")
    return COMPARE_VARIANTS[key](s.params)


def _apply_overrides(s: Scenario, args) -> Scenario:
    if getattr(args, "variant", None):
        s = s.with_variant(_variant_for(args.variant, s))
    if getattr(args, "horizon", None) is not None:
        s = s.with_horizon(args.horizon)
    changes = {}
    if getattr(args, "rel_tol", None) is not None:
        changes["rel_tol"] = args.rel_tol
    if getattr(args, "abs_tol", None) is not None:
        changes["abs_tol"] = args.abs_tol
    return s.with_solver(**changes) if changes else s


def _num(x, digits: Optional[int]) -> str:
    if x is None:
        return "-"
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, float):
        if digits is None:
            return repr(x)
        return f"{x:.{digits}f}" if math.isfinite(x) else repr(x)
    return str(x)


def format_report(s: Scenario, tr: Trajectory, digits: Optional[int] = None) -> str:
    b = compute_bounds(s.params, s.initial, s.variant, s.horizon)
    lines = [
        f"scenario: {s.name}",
        f"variant: {s.variant.kind.value}",
        f"horizon: {_num(s.horizon, digits)}",
        f"vehicles: {s.initial.size}",
        f"termination: {tr.termination.kind.value}",
        f"termination_time: {_num(tr.termination.t, digits)}",
        f"samples: {len(tr)}",
        f"accepted_steps: {tr.accepted_steps}",
        f"rejected_steps: {tr.rejected_steps}",
        f"events: {len(tr.events)}",
    ]
    if tr.termination.detail:
        lines.append(f"termination_detail: {tr.termination.detail}")
    for i in range(1, s.initial.size):
        m = compute_metrics(tr, (i - 1, i))
        lines.append("")
        lines.append(f"[metrics vehicle {i + 1} behind {i}]")
        for key, value in asdict(m).items():
            lines.append(f"{key}: {_num(value, digits)}")
    lines += ["", "[bounds]"]
    lines += [
        f"v_max: {_num(b.v_max, digits)}",
        f"delta_star: {_num(b.delta_star, digits)}",
        f"eps0_star (statement): {_num(b.eps0_star, digits)}",
        f"eps0_star (proof): {_num(b.eps0_star_proof_variant, digits)}",
        f"safe_distancing_ok: {_num(b.safe_distancing_ok, digits)}",
        f"global_wellposed_ok: {_num(b.global_wellposed_ok, digits)}",
    ]
    lines += ["", "[invariants]"]
    for chk in check_invariants(s, tr, b):
        lines.append(f"{chk.name}: {chk.status} ({chk.detail})")
    if s.initial.size >= 2:
        c = classify_run(s, tr, b)
        lines += ["", "[classification]"]
        for key, value in asdict(c).items():
            if key == "notes":
                value = "; ".join(value) if value else "-"
            lines.append(f"{key}: {_num(value, digits)}")
    return "\n".join(lines) + "\n"


def cmd_run(args) -> int:
    s = _apply_overrides(resolve_scenario(args.scenario), args)
    tr = integrate(s)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_series(out / "positions.csv", tr.t, tr.x, "x")
    write_series(out / "velocities.csv", tr.t, tr.v, "v")
    write_series(out / "accelerations.csv", tr.t, tr.acc, "a")
    report = format_report(s, tr, args.round)
    (out / "report.txt").write_text(report)
    m = compute_metrics(tr) if s.initial.size >= 2 else None
    print(f"{s.name}: {tr.termination.kind.value} at t={_num(tr.termination.t, args.round)}")
    if m is not None:
        print(f"min_velocity={_num(m.min_velocity, args.round)} min_gap={_num(m.min_gap, args.round)}"
              f" t_blowup_est={_num(m.t_blowup_est, args.round)}")
    print(f"wrote {out}/positions.csv velocities.csv accelerations.csv report.txt")
    return exit_code(tr.termination.kind)


def _split(text: str) -> list[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def _compare_one(job):
    scenario, variant_name = job
    s = scenario.with_variant(COMPARE_VARIANTS[variant_name](scenario.params))
    tr = integrate(s)
    m = compute_metrics(tr)
    return (variant_name, scenario.name, s.horizon, m.avg_gap, m.gap_variance, m.avg_distance,
            m.min_gap, m.min_velocity, tr.termination.kind.value)


COMPARE_HEADER = ("variant", "scenario", "horizon", "avg_gap", "gap_variance", "avg_distance",
                  "min_gap", "min_velocity", "termination")


def run_compare(scenarios: Sequence[Scenario], variants: Sequence[str], jobs: int = 1) -> list[tuple]:
    work = [(s, v) for v in variants for s in scenarios]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_compare_one, work))
    return [_compare_one(job) for job in work]


def cmd_compare(args) -> int:
    names = _split(args.scenario) if args.scenario else list(compare_cases())
    scenarios = [resolve_scenario(n) for n in names]
    if args.horizon is not None:
        scenarios = [s.with_horizon(args.horizon) for s in scenarios]
    variants = _split(args.variant) if args.variant is not None else list(DEFAULT_COMPARE_VARIANTS)
    for v in variants:
        if v not in COMPARE_VARIANTS:
            raise UsageError(f"unknown variant {v!r}")
    rows = run_compare(scenarios, variants, args.jobs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_table(out / "compare.csv", COMPARE_HEADER, rows)
    print(",".join(COMPARE_HEADER))
    for row in rows:
        print(",".join(_num(c, args.round) for c in row))
    return EXIT_OK


def parse_eps(text: str) -> list[float]:
    """``"0.5,1,1.5"`` or an inclusive ``"start:step:stop"`` range."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"eps range must be start:step:stop, got {text!r}")
        start, step, stop = (float(p) for p in parts)
        if step <= 0 or stop < start:
            raise UsageError(f"empty or invalid eps range {text!r}")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + k * step, 12) for k in range(count)]
    try:
        return [float(p) for p in _split(text)]
    except ValueError:
        raise UsageError(f"bad eps list {text!r}") from None


def cmd_sweep(args) -> int:
    base = _apply_overrides(resolve_scenario(args.scenario), args)
    eps = parse_eps(args.eps)
    bad = [e for e in eps if not 0 < e < base.params.s0]
    if bad:
        raise UsageError(f"eps values must lie in (0, s0={base.params.s0:g}): {bad}")
    rows = [(e, m.t_recover_positive_v, m.min_velocity) for e, m in epsilon_sweep(base, eps)]
    header = ("eps", "t_recover_positive_v", "min_velocity")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_table(out / "sweep.csv", header, rows)
    print(",".join(header))
    for row in rows:
        print(",".join(_num(c, args.round) for c in row))
    return EXIT_OK


def cmd_bounds(args) -> int:
    s = _apply_overrides(resolve_scenario(args.scenario), args)
    b = compute_bounds(s.params, s.initial, s.variant, s.horizon)
    d = args.round
    print(f"scenario: {s.name}")
    print(f"v_max: {_num(b.v_max, d)}")
    print(f"delta_star: {_num(b.delta_star, d)}")
    print(f"eps0_star (statement): {_num(b.eps0_star, d)}")
    print(f"eps0_star (proof): {_num(b.eps0_star_proof_variant, d)}")
    print(f"safe_distancing_ok: {_num(b.safe_distancing_ok, d)}")
    print(f"global_wellposed_ok: {_num(b.global_wellposed_ok, d)}")
    return EXIT_OK


def cmd_list(args) -> int:
    cat = {**builtin_scenarios(), **compare_cases()}
    width = max(len(n) for n in cat)
    for name, s in cat.items():
        print(f"{name:<{width}}  {s.variant.kind.value:<22}  T={s.horizon:<5g} {s.description}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="idmwp", description="Intelligent Driver Model simulator")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, scenario_default=None, variant=True):
        p.add_argument("--scenario", default=scenario_default, required=scenario_default is None,
                       help="builtin name or config file")
        if variant:
            p.add_argument("--variant", help="model variant override")
        p.add_argument("--horizon", type=float, help="time horizon [s]")
        p.add_argument("--rel-tol", type=float)
        p.add_argument("--abs-tol", type=float)
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--round", type=int, default=None, metavar="N",
                       help="digits after the point in printed reports")

    p = sub.add_parser("run", help="integrate one scenario and write CSVs plus a report")
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="variant x scenario metrics table")
    p.add_argument("--scenario", default=None, help="comma list (default case1,case2,case3)")
    p.add_argument("--variant", default=None, help="comma list (default: the four compared variants)")
    p.add_argument("--horizon", type=float)
    p.add_argument("--out", default=".")
    p.add_argument("--round", type=int, default=None, metavar="N")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep", help="initial-gap sweep of the recovery time")
    common(p, scenario_default="eps-sweep")
    p.add_argument("--eps", required=True, help="list a,b,c or range start:step:stop")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bounds", help="print the theoretical bounds")
    common(p)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("list-scenarios", help="list builtin scenarios")
    p.set_defaults(func=cmd_list)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"idmwp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvalidScenario as exc:
        print("idmwp: invalid scenario:", file=sys.stderr)
        for v in exc.violations:
            print(f"  {v}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
