"""Period-by-period simulation of one energy-harvesting small cell.

Every period runs the same sequence:

1. catalog dynamics (deaths, then births);
2. dead contents leave the cached and pushed sets (in the full-cache
   configuration newborns join the cache at once);
3. energy harvest, clipped at the battery capacity;
4. at most one user request, Zipf-distributed over the current ranks;
5. a request for a pushed content is served from the user's own storage
   and the cell sees no over-the-air request;
6. the policy picks one action and the engine executes it; an over-the-air
   request that is not unicast goes to the macro base station;
7. counters are updated once the warm-up window has passed.

All randomness of a run is drawn up front from one seeded PCG64 stream
(:class:`Draws`). The pure-Python :class:`Simulation` walks the draws one
period at a time and can emit a trace; :func:`run` hands the same draws to a
compiled loop. Both give identical counters for identical draws.
"""
from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import policy as pol
from .errors import ConfigError, PolicyContractError
from .model import (
    NEVER, Battery, Catalog, EnergyCosts, EnergyProcess, RequestProcess,
    ZipfPopularity, initial_catalog_size, make_rng, SEED_LIMIT,
)

CACHE_MODES = ("full", "fetch")


@dataclass(frozen=True)
class WorldConfig:
    """Every knob of a single run.

    Defaults are the case-study values: Bernoulli(0.5) arrivals of 3 units,
    2 units per transmission, 1 unit per fetched content, a 10-unit battery,
    contents living 1000 periods on average and Zipf exponent 1.
    """
    energy_probability: float = 0.5
    harvest_amount: int = 3
    fetch_cost: int = 1
    transmit_cost: int = 2
    fetch_billing: str = "per_content"
    capacity: int = 10
    initial_level: int = 0
    birth_rate: float = 1.0
    death_rate: float = 1e-3
    initial_contents: Optional[int] = None
    zipf_exponent: float = 1.0
    request_probability: float = 0.75
    policy: str = "baseline"
    cache_mode: str = "full"
    fetch_threshold: Optional[int] = None
    push_threshold: Optional[int] = None
    max_fetch: int = 3
    horizon: int = 1_000_000
    warmup: Optional[int] = None
    seed: int = 0

    # derived views -------------------------------------------------------

    @property
    def warmup_periods(self) -> int:
        return self.horizon // 10 if self.warmup is None else self.warmup

    @property
    def initial_size(self) -> int:
        if self.initial_contents is not None:
            return self.initial_contents
        return initial_catalog_size(self.birth_rate, self.death_rate)

    @property
    def costs(self) -> EnergyCosts:
        return EnergyCosts(self.fetch_cost, self.transmit_cost, self.fetch_billing)

    @property
    def energy(self) -> EnergyProcess:
        return EnergyProcess(self.energy_probability, self.harvest_amount)

    @property
    def threshold_params(self) -> pol.ThresholdParams:
        fetch = self.fetch_cost if self.fetch_threshold is None else self.fetch_threshold
        push = self.transmit_cost if self.push_threshold is None else self.push_threshold
        return pol.ThresholdParams(fetch, push, self.max_fetch)

    def replace(self, **changes) -> "WorldConfig":
        return dataclasses.replace(self, **changes)

    def validate(self) -> "WorldConfig":
        """Raise ConfigError unless the configuration is usable."""
        try:
            self.costs
            self.energy
            RequestProcess(self.request_probability)
            ZipfPopularity(self.zipf_exponent)
            Catalog(self.birth_rate, self.death_rate)
            Battery(self.initial_level, self.capacity)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ConfigError(f"horizon must be a positive integer, got {self.horizon}")
        if not 0 <= self.warmup_periods < self.horizon:
            raise ConfigError(
                f"need 0 <= warmup < horizon, got warmup={self.warmup_periods}, "
                f"horizon={self.horizon}")
        if self.initial_contents is not None and self.initial_contents < 0:
            raise ConfigError("initial_contents must be >= 0")
        if not 0 <= int(self.seed) < SEED_LIMIT:
            raise ConfigError(f"seed must fit in 64 unsigned bits, got {self.seed}")
        if self.policy not in pol.POLICIES:
            raise ConfigError(f"unknown policy {self.policy!r}")
        if self.cache_mode not in CACHE_MODES:
            raise ConfigError(f"unknown cache mode {self.cache_mode!r}")
        if self.policy == "push_only" and self.cache_mode != "full":
            raise ConfigError("push_only assumes every active content is cached "
                              "(cache_mode='full')")
        if self.policy == "threshold" and self.cache_mode != "fetch":
            raise ConfigError("threshold policy needs cache_mode='fetch'")
        if self.cache_mode == "fetch":
            self.threshold_params.validate(self.costs)
        return self


class Outcome(str, enum.Enum):
    NO_REQUEST = "none"
    SERVED_LOCALLY = "local"
    SERVED_BY_UNICAST = "unicast"
    SERVED_BY_MACRO = "macro"


@dataclass
class Metrics:
    total_requests: int = 0
    served_locally: int = 0
    served_by_unicast: int = 0
    served_by_macro: int = 0
    pushes: int = 0
    fetched_contents: int = 0
    energy_arrived: int = 0
    energy_spent: int = 0
    energy_wasted: int = 0
    periods_observed: int = 0
    initial_level: int = 0
    final_level: int = 0

    @property
    def eta_defined(self) -> bool:
        return self.total_requests > 0

    @property
    def eta(self) -> float:
        """Share of requests handled by the macro BS (NaN without requests)."""
        if self.total_requests == 0:
            return math.nan
        return self.served_by_macro / self.total_requests

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_array(cls, values) -> "Metrics":
        return cls(*(int(x) for x in values))


@dataclass(frozen=True)
class PeriodReport:
    t: int
    arrived: int
    wasted: int
    request: Optional[int]
    outcome: Outcome
    action: pol.Action
    level: int

    def line(self, names=None) -> str:
        """One whitespace-separated trace line."""
        label = (lambda cid: str(cid)) if names is None else (lambda cid: names[cid])
        req = "-" if self.request is None else label(self.request)
        action = self.action
        if isinstance(action, pol.Fetch):
            text = "fetch:" + ",".join(label(i) for i in action.ids)
        elif isinstance(action, pol.Push):
            text = f"push:{label(action.id)}"
        elif isinstance(action, pol.Unicast):
            text = f"unicast:{label(action.id)}"
        else:
            text = "idle"
        return (f"{self.t} {self.arrived} {self.wasted} {req} "
                f"{self.outcome.value} {text} {self.level}")


@dataclass
class Draws:
    """Every random number one run consumes, in a fixed generation order."""
    initial_keys: np.ndarray
    initial_lifetimes: np.ndarray
    energy: np.ndarray
    request: np.ndarray
    request_u: np.ndarray
    births: np.ndarray
    keys: np.ndarray
    lifetimes: np.ndarray

    @staticmethod
    def _lifetimes(rng, death_rate: float, n: int) -> np.ndarray:
        if death_rate <= 0:
            return np.full(n, NEVER, dtype=np.int64)
        return rng.geometric(death_rate, n).astype(np.int64)

    @classmethod
    def generate(cls, config: WorldConfig) -> "Draws":
        rng = make_rng(config.seed)
        n0, horizon = config.initial_size, config.horizon
        initial_keys = rng.random(n0)
        initial_lifetimes = cls._lifetimes(rng, config.death_rate, n0)
        energy = rng.random(horizon) < config.energy_probability
        request = rng.random(horizon) < config.request_probability
        request_u = rng.random(horizon)
        if config.birth_rate > 0:
            births = rng.poisson(config.birth_rate, horizon).astype(np.int64)
        else:
            births = np.zeros(horizon, dtype=np.int64)
        total = int(births.sum())
        keys = rng.random(total)
        lifetimes = cls._lifetimes(rng, config.death_rate, total)
        return cls(initial_keys, initial_lifetimes, energy, request, request_u,
                   births, keys, lifetimes)

    @classmethod
    def frozen(cls, n_contents: int, horizon: int = 0) -> "Draws":
        """Deterministic draws: a static catalog in id order, nothing random."""
        return cls((np.arange(n_contents) + 0.5) / max(n_contents, 1),
                   np.full(n_contents, NEVER, dtype=np.int64),
                   np.zeros(horizon, dtype=bool), np.zeros(horizon, dtype=bool),
                   np.zeros(horizon), np.zeros(horizon, dtype=np.int64),
                   np.zeros(0), np.zeros(0, dtype=np.int64))


class Simulation:
    """Reference implementation of the period loop.

    Slow but transparent: it uses the policy functions directly, checks the
    set containment invariant as it goes, and records a trace on request.
    """

    def __init__(self, config: WorldConfig, draws: Optional[Draws] = None):
        self.config = config.validate()
        self.draws = Draws.generate(config) if draws is None else draws
        d = self.draws
        self.catalog = Catalog.seeded(config.birth_rate, config.death_rate,
                                      d.initial_keys, d.initial_lifetimes)
        self.full_cache = config.cache_mode == "full"
        self.cell = pol.CellState(Battery(config.initial_level, config.capacity),
                                  set(self.catalog.ranked) if self.full_cache else set(),
                                  set())
        self.costs = config.costs
        self.params = config.threshold_params if config.cache_mode == "fetch" else None
        self.popularity = ZipfPopularity(config.zipf_exponent)
        self.metrics = Metrics()
        self.t = 0
        self._newborn = 0

    # -- stochastic phases --------------------------------------------------

    def _advance_catalog(self) -> set:
        t, d = self.t, self.draws
        died = self.catalog.expire(t)
        if died:
            self.cell.prune(died)
        for _ in range(int(d.births[t])):
            j = self._newborn
            content = self.catalog.add(float(d.keys[j]), t, int(d.lifetimes[j]))
            self._newborn += 1
            if self.full_cache:
                self.cell.cached.add(content.id)
        return died

    def _draw_request(self) -> Optional[int]:
        t, d = self.t, self.draws
        m = len(self.catalog)
        if not d.request[t] or m == 0:
            return None
        return self.catalog.ranked[self.popularity.sample_index(m, float(d.request_u[t]))]

    def step(self) -> PeriodReport:
        if self.t >= self.config.horizon:
            raise IndexError("simulation horizon exhausted")
        self._advance_catalog()
        arrival = self.config.harvest_amount if self.draws.energy[self.t] else 0
        return self.period(arrival, self._draw_request())

    # -- deterministic phases -----------------------------------------------

    def decide(self, request: Optional[int]) -> pol.Action:
        inp = pol.PolicyInput(self.catalog.ranked, self.cell, request, self.costs)
        return pol.decide(self.config.policy, inp, self.params)

    def illegal(self, action: pol.Action, ota: Optional[int]) -> Optional[str]:
        """Why `action` cannot run in the current state, or None if it can.

        Energy is checked last, so a non-None answer for an otherwise legal
        action means the battery cannot pay for it.
        """
        cell = self.cell
        if isinstance(action, pol.Fetch):
            if self.full_cache:
                return "fetch in the full-cache configuration"
            if not action.ids:
                return "empty fetch"
            for cid in action.ids:
                if cid not in self.catalog or cid in cell.cached:
                    return f"fetch of {cid}, which is inactive or already cached"
        elif isinstance(action, pol.Push):
            if action.id not in cell.cached or action.id in cell.pushed:
                return f"push of {action.id}, which is uncached or already pushed"
        elif isinstance(action, pol.Unicast):
            if action.id != ota:
                return f"unicast of {action.id} without an over-the-air request for it"
            if action.id not in cell.cached:
                return f"unicast of uncached content {action.id}"
        if not pol.affordable(action, cell.battery, self.costs):
            return (f"{pol.describe(action)} needs {pol.cost(action, self.costs)} "
                    f"units, battery holds {cell.battery.level}")
        return None

    def period(self, arrival: int, request: Optional[int],
               forced: Optional[pol.Action] = None) -> PeriodReport:
        """Phases 3 to 7 with explicit inputs (used directly by replays).

        A `forced` action replaces the policy decision; callers are expected
        to have vetted it with :meth:`illegal`.
        """
        cell, costs = self.cell, self.costs
        start_level = cell.battery.level
        wasted = cell.battery.charge(arrival) if arrival else 0
        local = request is not None and request in cell.pushed
        ota = None if local else request
        action = self.decide(ota) if forced is None else forced
        problem = self.illegal(action, ota)
        if problem is not None and pol.affordable(action, cell.battery, costs):
            raise PolicyContractError(f"{self.config.policy} at t={self.t}: {problem}")
        spent = pol.cost(action, costs)
        # raises InsufficientEnergy for an unaffordable action
        cell.battery.spend(spent)
        if isinstance(action, pol.Fetch):
            cell.cached.update(action.ids)
        elif isinstance(action, pol.Push):
            cell.pushed.add(action.id)

        if request is None:
            outcome = Outcome.NO_REQUEST
        elif local:
            outcome = Outcome.SERVED_LOCALLY
        elif isinstance(action, pol.Unicast):
            outcome = Outcome.SERVED_BY_UNICAST
        else:
            outcome = Outcome.SERVED_BY_MACRO

        if self.t >= self.config.warmup_periods:
            self._record(start_level, arrival, wasted, spent, outcome, action)
        report = PeriodReport(self.t, arrival, wasted, request, outcome, action,
                              cell.battery.level)
        self.t += 1
        return report

    def _record(self, start_level, arrival, wasted, spent, outcome, action):
        m = self.metrics
        if self.t == self.config.warmup_periods:
            m.initial_level = start_level
        m.periods_observed += 1
        m.energy_arrived += arrival
        m.energy_wasted += wasted
        m.energy_spent += spent
        if outcome is not Outcome.NO_REQUEST:
            m.total_requests += 1
            if outcome is Outcome.SERVED_LOCALLY:
                m.served_locally += 1
            elif outcome is Outcome.SERVED_BY_UNICAST:
                m.served_by_unicast += 1
            else:
                m.served_by_macro += 1
        if isinstance(action, pol.Push):
            m.pushes += 1
        elif isinstance(action, pol.Fetch):
            m.fetched_contents += len(action.ids)
        m.final_level = self.cell.battery.level

    def check_invariants(self) -> None:
        cell = self.cell
        assert cell.pushed <= cell.cached, "pushed set escaped the cache"
        assert cell.cached <= set(self.catalog.contents), "cache holds dead content"
        assert 0 <= cell.battery.level <= cell.battery.capacity

    def run(self, trace: bool = False):
        reports = []
        while self.t < self.config.horizon:
            report = self.step()
            if trace:
                reports.append(report)
        return (self.metrics, reports) if trace else self.metrics


def run(config: WorldConfig, fast: bool = True) -> Metrics:
    """Simulate `config.horizon` periods and return post-warm-up counters."""
    config.validate()
    if not fast:
        return Simulation(config).run()
    from ._kernel import run_draws
    return Metrics.from_array(run_draws(config, Draws.generate(config)))


def run_traced(config: WorldConfig) -> tuple[Metrics, list[PeriodReport]]:
    return Simulation(config).run(trace=True)
