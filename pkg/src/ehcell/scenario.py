"""Scripted replays with every random draw fixed by a text file.

Script format, one line per period::

    <period> <energy_arrived> <request|-> [<action>]

Periods are numbered consecutively from 1. `request` names a content and
`action` is ``idle``, ``push:<name>``, ``unicast:<name>`` or
``fetch:<name>[,<name>...]``; periods without an action are left to the
policy. A ``#`` starts a comment line. Comment lines of the form
``# @key value`` set the world the script runs in::

    # @catalog red green blue      (names, most popular first)
    # @capacity 6
    # @initial_level 2
    # @fetch_cost 1
    # @transmit_cost 2
    # @fetch_billing per_period
    # @cache_mode fetch
    # @policy baseline
"""
from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

from . import policy as pol
from .engine import Draws, PeriodReport, Simulation, WorldConfig
from .errors import ConfigError, ScenarioError

_INT_KEYS = {"capacity", "initial_level", "fetch_cost", "transmit_cost",
             "fetch_threshold", "push_threshold", "max_fetch"}
_STR_KEYS = {"fetch_billing", "cache_mode", "policy"}


@dataclass
class ScenarioLine:
    period: int
    arrival: int
    request: Optional[str]
    action: Optional[str] = None


@dataclass
class Scenario:
    catalog: list = field(default_factory=list)
    settings: dict = field(default_factory=dict)
    lines: list = field(default_factory=list)

    @property
    def budget(self) -> int:
        """Initial battery level plus every scripted arrival."""
        return int(self.settings.get("initial_level", 0)) + sum(l.arrival for l in self.lines)

    def requests(self) -> list:
        return [l.request for l in self.lines if l.request is not None]


def parse_scenario(text: str) -> Scenario:
    scenario = Scenario()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("@"):
                key, _, value = body[1:].partition(" ")
                value = value.split("(")[0].strip()
                if key == "catalog":
                    scenario.catalog = value.split()
                elif key in _INT_KEYS:
                    scenario.settings[key] = int(value)
                elif key in _STR_KEYS:
                    scenario.settings[key] = value
                else:
                    raise ScenarioError(f"line {lineno}: unknown directive @{key}")
            continue
        fields = line.split()
        if len(fields) not in (3, 4):
            raise ScenarioError(f"line {lineno}: expected 3 or 4 fields, got {len(fields)}")
        try:
            period, arrival = int(fields[0]), int(fields[1])
        except ValueError as exc:
            raise ScenarioError(f"line {lineno}: {exc}") from None
        expected = len(scenario.lines) + 1
        if period != expected:
            raise ScenarioError(f"periods must count up from 1, expected {expected}",
                                period=period)
        if arrival < 0:
            raise ScenarioError("negative energy arrival", period=period)
        request = None if fields[2] == "-" else fields[2]
        action = fields[3] if len(fields) == 4 else None
        scenario.lines.append(ScenarioLine(period, arrival, request, action))
    return scenario


def load_scenario(path) -> Scenario:
    return parse_scenario(Path(path).read_text())


def builtin_path(name: str, suffix: str = ".scn") -> Path:
    """Path of a script shipped with the package, e.g. ``builtin_path("fig2")``."""
    path = Path(str(resources.files("ehcell") / "data" / f"{name}{suffix}"))
    if not path.is_file():
        raise ScenarioError(f"no built-in scenario named {name!r}")
    return path


def _parse_action(text: str, ids: dict, period: int) -> pol.Action:
    kind, _, arg = text.partition(":")
    try:
        if kind == "idle" and not arg:
            return pol.IDLE
        if kind == "fetch" and arg:
            return pol.Fetch(tuple(ids[name] for name in arg.split(",")))
        if kind == "push" and arg:
            return pol.Push(ids[arg])
        if kind == "unicast" and arg:
            return pol.Unicast(ids[arg])
    except KeyError as exc:
        raise ScenarioError(f"unknown content {exc.args[0]!r}", period=period) from None
    raise ScenarioError(f"cannot parse action {text!r}", period=period)


def scenario_config(scenario: Scenario, **overrides) -> WorldConfig:
    settings = dict(policy="baseline", cache_mode="fetch", initial_level=0)
    settings.update(scenario.settings)
    settings.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return WorldConfig(
            energy_probability=0.0, request_probability=0.0, birth_rate=0.0,
            death_rate=0.0, initial_contents=len(scenario.catalog),
            horizon=max(len(scenario.lines), 1), warmup=0, **settings).validate()
    except (ConfigError, TypeError) as exc:
        raise ScenarioError(f"bad scenario settings: {exc}") from None


def replay_scenario(scenario, policy: Optional[str] = None,
                    cache_mode: Optional[str] = None,
                    fetch_billing: Optional[str] = None) -> list[PeriodReport]:
    """Run a script and return one report per period.

    `scenario` is a parsed :class:`Scenario`, a :class:`~pathlib.Path` to a
    script file, or the script text itself.

    Scripted actions are executed as written unless `policy` is given, in
    which case that policy decides every period. Report ids are catalog
    positions; ``scenario.catalog[id]`` is the content name.
    """
    if isinstance(scenario, Path):
        scenario = load_scenario(scenario)
    elif isinstance(scenario, str):
        scenario = parse_scenario(scenario)
    config = scenario_config(scenario, policy=policy, cache_mode=cache_mode,
                             fetch_billing=fetch_billing)
    ids = {name: i for i, name in enumerate(scenario.catalog)}
    sim = Simulation(config, Draws.frozen(len(scenario.catalog)))

    reports = []
    for line in scenario.lines:
        if line.request is not None and line.request not in ids:
            raise ScenarioError(f"request for unknown content {line.request!r}",
                                period=line.period)
        request = None if line.request is None else ids[line.request]
        forced = None
        if line.action is not None and policy is None:
            forced = _parse_action(line.action, ids, line.period)
            # the check needs the post-harvest battery, so probe on a copy
            probe = sim.cell.battery.level
            sim.cell.battery.charge(line.arrival)
            ota = None if request in sim.cell.pushed else request
            problem = sim.illegal(forced, ota)
            sim.cell.battery.level = probe
            if problem is not None:
                raise ScenarioError(problem, period=line.period)
        report = sim.period(line.arrival, request, forced)
        reports.append(_renumber(report, line.period))
    return reports


def _renumber(report: PeriodReport, period: int) -> PeriodReport:
    return PeriodReport(period, report.arrived, report.wasted, report.request,
                        report.outcome, report.action, report.level)


def format_trace(reports, names=None) -> str:
    header = "# period arrived wasted request outcome action level\n"
    return header + "".join(r.line(names) + "\n" for r in reports)


def reactive_demand(requests, costs) -> int:
    """Energy a purely reactive cell needs to serve `requests` itself.

    Every request costs one unicast, and every distinct content must be
    fetched once before its first unicast.
    """
    return len(requests) * costs.transmit_cost + len(set(requests)) * costs.fetch_cost
