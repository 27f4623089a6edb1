"""Parameter sweeps with seeded replications.

Every (value, policy) cell runs the same replication seeds
``seed_base + r`` for ``r = 0 .. replications-1``, so policies are compared
on common random numbers. Runs may execute in a process pool; results are
always reduced in (value, policy, replication) order, so the worker count
never changes the output.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from ..engine import Metrics, WorldConfig, run
from ..errors import ConfigError

# sweep axis symbol -> WorldConfig field
AXES = {
    "p_r": "request_probability",
    "E_max": "capacity",
    "v": "zipf_exponent",
    "λ_c": "birth_rate",
    "lambda_c": "birth_rate",
    "M_f": "fetch_threshold",
    "M_p": "push_threshold",
    "K": "max_fetch",
    "p": "energy_probability",
    "E_H": "harvest_amount",
}
INTEGER_FIELDS = {"capacity", "fetch_threshold", "push_threshold", "max_fetch",
                  "harvest_amount"}


@dataclass
class SweepSpec:
    base: WorldConfig
    axis: str
    values: list
    policies: list
    replications: int = 20
    seed_base: int = 0
    name: str = ""

    @property
    def field(self) -> str:
        return AXES[self.axis]

    def validate(self) -> "SweepSpec":
        if self.axis not in AXES:
            raise ConfigError(f"unknown sweep axis {self.axis!r}; "
                              f"choose from {', '.join(AXES)}")
        if not self.values:
            raise ConfigError("sweep needs at least one axis value")
        if not self.policies:
            raise ConfigError("sweep needs at least one policy")
        if self.replications < 1:
            raise ConfigError("replications must be positive")
        for value in self.values:
            for policy in self.policies:
                self.cell_config(value, policy, 0)
        return self

    def cell_config(self, value, policy: str, replication: int) -> WorldConfig:
        if self.field in INTEGER_FIELDS:
            if float(value) != int(value):
                raise ConfigError(f"{self.axis} takes integers, got {value!r}")
            value = int(value)
        try:
            return self.base.replace(**{self.field: value}, policy=policy,
                                     seed=self.seed_base + replication).validate()
        except ConfigError as exc:
            raise ConfigError(f"cell {self.axis}={value}, policy={policy}: {exc}") from None


@dataclass
class SweepCell:
    value: float
    policy: str
    eta_mean: float
    eta_ci95: float
    local: float
    unicast: float
    macro: float
    pushes: float
    fetches: float
    wasted: float
    reps: int
    etas: list = field(default_factory=list, repr=False)

    @property
    def interval(self) -> tuple[float, float]:
        return self.eta_mean - self.eta_ci95, self.eta_mean + self.eta_ci95


@dataclass
class SweepResult:
    spec: SweepSpec
    cells: list

    def cell(self, value, policy: str) -> SweepCell:
        for c in self.cells:
            if c.value == value and c.policy == policy:
                return c
        raise KeyError((value, policy))

    def series(self, policy: str) -> list:
        return [c for c in self.cells if c.policy == policy]


def confidence_halfwidth(samples) -> float:
    """Student-t 95% half-width of the sample mean (0 for one sample)."""
    x = np.asarray(samples, dtype=float)
    if len(x) < 2:
        return 0.0
    return float(stats.t.ppf(0.975, len(x) - 1) * x.std(ddof=1) / math.sqrt(len(x)))


def aggregate(value, policy: str, runs: list[Metrics]) -> SweepCell:
    """Reduce replications of one cell.

    Replications without requests have no η and are left out of the η
    statistics (but not of the counter means).
    """
    etas = [m.eta for m in runs if m.eta_defined]
    mean = lambda attr: float(np.mean([getattr(m, attr) for m in runs]))
    return SweepCell(
        value=value, policy=policy,
        eta_mean=float(np.mean(etas)) if etas else math.nan,
        eta_ci95=confidence_halfwidth(etas) if etas else math.nan,
        local=mean("served_locally"), unicast=mean("served_by_unicast"),
        macro=mean("served_by_macro"), pushes=mean("pushes"),
        fetches=mean("fetched_contents"), wasted=mean("energy_wasted"),
        reps=len(runs), etas=etas)


def run_sweep(spec: SweepSpec, workers: int = 1) -> SweepResult:
    spec.validate()
    tasks = [(value, policy, spec.cell_config(value, policy, r))
             for value in spec.values for policy in spec.policies
             for r in range(spec.replications)]
    configs = [t[2] for t in tasks]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            metrics = list(pool.map(run, configs, chunksize=max(1, len(configs) // (4 * workers))))
    else:
        metrics = [run(c) for c in configs]

    cells = []
    for i in range(0, len(tasks), spec.replications):
        value, policy, _ = tasks[i]
        cells.append(aggregate(value, policy, metrics[i:i + spec.replications]))
    return SweepResult(spec, cells)
