"""Scenario config files and CSV emission.

Config format, one ``key = value`` per line under ``[section]`` headers::

    [run]
    name = my-run
    horizon = 3

    [params]          # all seven keys required
    a = 1
    v_free = 120 km/h
    ...

``#`` starts a comment. Unknown sections or keys are errors, reported with
their line number.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .types import (
    ConstantAccel,
    FreeFlow,
    ModelParams,
    PiecewiseConstant,
    PlatoonState,
    Scenario,
    SolverSettings,
    StopAndGoSine,
    Variant,
    VariantConfig,
    VehicleState,
)

_UNITS = {
    "": 1.0,
    "m": 1.0,
    "s": 1.0,
    "m/s": 1.0,
    "m/s^2": 1.0,
    "m/s2": 1.0,
    "km/h": 1000.0 / 3600.0,
    "kmh": 1000.0 / 3600.0,
}

_NUMBER = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([A-Za-z/^0-9]*)\s*$")

_PARAM_KEYS = ("a", "b", "v_free", "tau", "s0", "l", "delta")
_VARIANT_EXTRA = {
    Variant.ACCELERATION_PROJECTED: "a_min",
    Variant.VELOCITY_REGULARIZED: "eps_v",
    Variant.DISTANCE_REGULARIZED: "eps_d",
}
_LEADER_KEYS = {
    "constant": {"u"},
    "free-flow": set(),
    "piecewise": {"schedule"},
    "stop-and-go": {"amplitude", "threshold", "divisor"},
}
_SOLVER_KEYS = tuple(f.name for f in fields(SolverSettings))
_SECTIONS = {
    "run": {"name", "horizon", "description"},
    "params": set(_PARAM_KEYS) | {"d"},
    "variant": {"name", "a_min", "eps_v", "eps_d", "signed_power"},
    "leader": {"profile", "u", "schedule", "amplitude", "threshold", "divisor"},
    "initial": {"x", "v"},
    "solver": set(_SOLVER_KEYS),
}


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, source: str = "<config>"):
        self.line = line
        self.source = source
        where = f"{source}:{line}: " if line is not None else f"{source}: "
        super().__init__(where + message)


@dataclass
class _Entry:
    value: str
    line: int


def parse_quantity(text: str) -> float:
    """Number with an optional unit suffix; ``km/h`` converts to m/s."""
    m = _NUMBER.match(text)
    if not m:
        raise ValueError(f"not a number: {text!r}")
    unit = m.group(2).lower()
    if unit not in _UNITS:
        raise ValueError(f"unknown unit {m.group(2)!r}")
    return float(m.group(1)) * _UNITS[unit]


def _parse_lines(text: str, source: str) -> dict[str, dict[str, _Entry]]:
    doc: dict[str, dict[str, _Entry]] = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {raw.strip()!r}", lineno, source)
            section = line[1:-1].strip().lower()
            if section not in _SECTIONS:
                raise ConfigError(f"unknown section [{section}]", lineno, source)
            if section in doc:
                raise ConfigError(f"duplicate section [{section}]", lineno, source)
            doc[section] = {}
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno, source)
        if section is None:
            raise ConfigError("key outside of any section", lineno, source)
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.lower()
        if key not in _SECTIONS[section]:
            raise ConfigError(f"unknown key {key!r} in [{section}]", lineno, source)
        if key in doc[section]:
            raise ConfigError(f"duplicate key {key!r} in [{section}]", lineno, source)
        doc[section][key] = _Entry(value, lineno)
    return doc


class _Reader:
    def __init__(self, doc, source):
        self.doc = doc
        self.source = source

    def section(self, name: str, required: bool = True) -> dict[str, _Entry]:
        if name not in self.doc:
            if required:
                raise ConfigError(f"missing section [{name}]", None, self.source)
            return {}
        return self.doc[name]

    def num(self, sec: dict[str, _Entry], key: str, section: str) -> float:
        if key not in sec:
            raise ConfigError(f"missing key {key!r} in [{section}]", None, self.source)
        entry = sec[key]
        try:
            return parse_quantity(entry.value)
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}", entry.line, self.source) from None

    def nums(self, sec: dict[str, _Entry], key: str, section: str) -> list[float]:
        if key not in sec:
            raise ConfigError(f"missing key {key!r} in [{section}]", None, self.source)
        entry = sec[key]
        try:
            return [parse_quantity(part) for part in entry.value.split(",") if part.strip()]
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}", entry.line, self.source) from None

    def reject_extra(self, sec: dict[str, _Entry], allowed: set, section: str, why: str):
        for key, entry in sec.items():
            if key not in allowed:
                raise ConfigError(f"key {key!r} in [{section}] not used by {why}", entry.line, self.source)


def _parse_bool(entry: _Entry, source: str) -> bool:
    low = entry.value.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"not a boolean: {entry.value!r}", entry.line, source)


def parse_config(text: str, source: str = "<config>") -> Scenario:
    """Build a :class:`Scenario` from config text (not yet validated)."""
    r = _Reader(_parse_lines(text, source), source)

    run = r.section("run")
    horizon = r.num(run, "horizon", "run")
    name = run["name"].value if "name" in run else Path(source).stem
    description = run["description"].value if "description" in run else ""

    ps = r.section("params")
    if "d" in ps and "delta" in ps:
        raise ConfigError("give either 'd' or 'delta', not both", ps["d"].line, source)
    if "d" in ps:
        ps = {**ps, "delta": ps["d"]}
    params = ModelParams(**{k: r.num(ps, k, "params") for k in _PARAM_KEYS})

    vs = r.section("variant", required=False)
    vname = vs["name"].value.strip().lower() if "name" in vs else "classic"
    try:
        kind = Variant(vname)
    except ValueError:
        line = vs["name"].line if "name" in vs else None
        names = ", ".join(v.value for v in Variant)
        raise ConfigError(f"unknown variant {vname!r} (choose from {names})", line, source) from None
    extra_key = _VARIANT_EXTRA.get(kind)
    r.reject_extra(vs, {"name", "signed_power"} | ({extra_key} if extra_key else set()), "variant", vname)
    extras = {extra_key: r.num(vs, extra_key, "variant")} if extra_key else {}
    signed = _parse_bool(vs["signed_power"], source) if "signed_power" in vs else False
    variant = VariantConfig(kind, signed_power=signed, **extras)

    ls = r.section("leader")
    if "profile" not in ls:
        raise ConfigError("missing key 'profile' in [leader]", None, source)
    prof = ls["profile"].value.strip().lower()
    if prof not in _LEADER_KEYS:
        raise ConfigError(
            f"unknown leader profile {prof!r} (choose from {', '.join(_LEADER_KEYS)})",
            ls["profile"].line, source,
        )
    r.reject_extra(ls, {"profile"} | _LEADER_KEYS[prof], "leader", f"profile {prof}")
    if prof == "constant":
        leader = ConstantAccel(r.num(ls, "u", "leader"))
    elif prof == "free-flow":
        leader = FreeFlow()
    elif prof == "piecewise":
        leader = PiecewiseConstant(_parse_schedule(ls.get("schedule"), source))
    else:
        kw = {"amplitude": r.num(ls, "amplitude", "leader")}
        if "threshold" in ls:
            kw["threshold"] = r.num(ls, "threshold", "leader")
        if "divisor" in ls:
            kw["angular_divisor"] = r.num(ls, "divisor", "leader")
        leader = StopAndGoSine(**kw)

    ini = r.section("initial")
    xs = r.nums(ini, "x", "initial")
    vs_ = r.nums(ini, "v", "initial")
    if len(xs) != len(vs_):
        raise ConfigError(
            f"[initial] x has {len(xs)} entries but v has {len(vs_)}", ini["v"].line, source
        )
    initial = PlatoonState(0.0, tuple(VehicleState(x, v) for x, v in zip(xs, vs_)))

    solver = SolverSettings()
    for key, entry in r.section("solver", required=False).items():
        value = r.num({key: entry}, key, "solver")
        if key == "max_steps":
            if not value.is_integer():
                raise ConfigError("max_steps must be an integer", entry.line, source)
            value = int(value)
        solver = replace(solver, **{key: value})

    return Scenario(params, variant, leader, initial, horizon, solver, name=name, description=description)


def _parse_schedule(entry, source) -> tuple[tuple[float, float], ...]:
    if entry is None:
        raise ConfigError("missing key 'schedule' in [leader]", None, source)
    out = []
    for item in entry.value.split(","):
        if not item.strip():
            continue
        if ":" not in item:
            raise ConfigError(f"schedule item {item.strip()!r} is not 't_start:accel'", entry.line, source)
        t, u = item.split(":", 1)
        try:
            out.append((parse_quantity(t), parse_quantity(u)))
        except ValueError as exc:
            raise ConfigError(f"schedule: {exc}", entry.line, source) from None
    return tuple(out)


def load_config(path: str | Path) -> Scenario:
    path = Path(path)
    return parse_config(path.read_text(), source=str(path))


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def scenario_to_config(s: Scenario) -> str:
    """Config text that parses back to ``s``."""
    p = s.params
    lines = ["[run]", f"name = {s.name}", f"horizon = {_fmt(s.horizon)}"]
    if s.description:
        lines.append(f"description = {s.description.replace('#', '')}")
    lines += ["", "[params]"] + [f"{k} = {_fmt(getattr(p, k))}" for k in _PARAM_KEYS]
    lines += ["", "[variant]", f"name = {s.variant.kind.value}"]
    extra_key = _VARIANT_EXTRA.get(s.variant.kind)
    if extra_key:
        lines.append(f"{extra_key} = {_fmt(getattr(s.variant, extra_key))}")
    if s.variant.signed_power:
        lines.append("signed_power = true")
    lines += ["", "[leader]"]
    lead = s.leader
    if isinstance(lead, ConstantAccel):
        lines += ["profile = constant", f"u = {_fmt(lead.u)}"]
    elif isinstance(lead, FreeFlow):
        lines += ["profile = free-flow"]
    elif isinstance(lead, PiecewiseConstant):
        sched = ", ".join(f"{_fmt(t)}:{_fmt(u)}" for t, u in lead.schedule)
        lines += ["profile = piecewise", f"schedule = {sched}"]
    else:
        lines += [
            "profile = stop-and-go",
            f"amplitude = {_fmt(lead.amplitude)}",
            f"threshold = {_fmt(lead.threshold)}",
            f"divisor = {_fmt(lead.angular_divisor)}",
        ]
    lines += [
        "",
        "[initial]  # leader first",
        "x = " + ", ".join(_fmt(veh.x) for veh in s.initial.vehicles),
        "v = " + ", ".join(_fmt(veh.v) for veh in s.initial.vehicles),
        "",
        "[solver]",
    ]
    for key in _SOLVER_KEYS:
        value = getattr(s.solver, key)
        if value is not None:
            lines.append(f"{key} = {value if isinstance(value, int) else _fmt(value)}")
    return "\n".join(lines) + "\n"


def write_series(path: str | Path, t: np.ndarray, columns: np.ndarray, prefix: str) -> None:
    """CSV with header ``t, <prefix>_1 .. <prefix>_N`` in 17 significant digits."""
    n = columns.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"{prefix}_{i}" for i in range(1, n + 1)])
        for k in range(t.size):
            w.writerow([_fmt(t[k])] + [_fmt(c) for c in columns[k]])


def read_series(path: str | Path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    return header, np.array([[float(c) for c in row] for row in body], dtype=np.float64).reshape(
        len(body), len(header)
    )


def write_table(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    def cell(v):
        if isinstance(v, float):
            return "" if math.isnan(v) else _fmt(v)
        return "" if v is None else str(v)

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([cell(v) for v in row])
