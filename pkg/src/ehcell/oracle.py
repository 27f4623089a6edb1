"""Exact reference values for small or reduced configurations.

Two independent routes to the macro-fallback ratio:

* :func:`exact_eta_baseline` solves the battery Markov chain of the reactive
  baseline on a static catalog (every request needs a unicast) for its
  stationary distribution.
* :func:`exhaustive_eta` enumerates every energy/request outcome of a tiny
  frozen-catalog world over a short horizon, merging branches that reach the
  same state, and returns exact expectations of all counters.

Neither touches the simulation engine; they exist to check it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import policy as pol
from .errors import ConfigError, OracleTooLarge, PreconditionError
from .model import Battery, zipf_pmf

MAX_CONTENTS = 3
MAX_HORIZON = 12


@dataclass(frozen=True)
class ChainSpec:
    capacity: int
    energy_probability: float
    harvest_amount: int
    transmit_cost: int
    request_probability: float

    def __post_init__(self):
        if self.transmit_cost > self.capacity:
            raise ConfigError("transmit cost exceeds capacity: no request is ever servable")
        if self.transmit_cost < 1 or self.harvest_amount < 0:
            raise ConfigError("transmit cost must be >= 1 and harvest amount >= 0")
        for name in ("energy_probability", "request_probability"):
            if not 0 <= getattr(self, name) <= 1:
                raise ConfigError(f"{name} must lie in [0, 1]")


def transition_matrix(spec: ChainSpec) -> np.ndarray:
    """Transitions between post-harvest battery levels 0..capacity."""
    n = spec.capacity + 1
    p, pr = spec.energy_probability, spec.request_probability
    P = np.zeros((n, n))
    for b in range(n):
        if b >= spec.transmit_cost:
            after = [(b - spec.transmit_cost, pr), (b, 1.0 - pr)]
        else:
            after = [(b, 1.0)]
        for level, weight in after:
            P[b, min(level + spec.harvest_amount, spec.capacity)] += weight * p
            P[b, level] += weight * (1.0 - p)
    return P


def stationary_distribution(spec: ChainSpec) -> np.ndarray:
    """Stationary law of the post-harvest battery level.

    Requires a single recurrent class, which holds whenever energy can
    arrive (``p > 0`` and a positive harvest): from any level, repeated
    harvests reach the full battery.
    """
    if spec.energy_probability == 0 or spec.harvest_amount == 0:
        raise PreconditionError("no energy ever arrives; the chain has no unique "
                                "stationary law")
    P = transition_matrix(spec)
    n = P.shape[0]
    A = P.T - np.eye(n)
    A[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    pi = np.linalg.solve(A, rhs)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def exact_eta_baseline(spec: ChainSpec) -> float:
    """Long-run share of requests the reactive baseline hands to the macro BS.

    Requests are independent of the battery, so the share equals the
    stationary probability that the post-harvest level is below the
    transmit cost.
    """
    if spec.energy_probability == 0 or spec.harvest_amount == 0:
        # the battery only drains; once below the transmit cost it stays there
        return 1.0 if spec.request_probability > 0 else math.nan
    pi = stationary_distribution(spec)
    return float(pi[: spec.transmit_cost].sum())


def eta_standard_error(spec: ChainSpec, periods: int) -> float:
    """Exact large-sample standard error of a simulated baseline η.

    Fallbacks cluster in energy droughts, so the binomial error
    ``sqrt(η(1-η)/n)`` understates the spread of a long run. This works
    with the joint chain of (post-harvest level, request flag), since
    serving a request changes the next level, and uses the fundamental
    matrix for the asymptotic variance of the macro count minus η times
    the request count. The delta method turns that into the error of the
    ratio after `periods` observed periods.
    """
    eta = exact_eta_baseline(spec)
    pr = spec.request_probability
    if pr == 0 or spec.energy_probability == 0 or spec.harvest_amount == 0:
        return 0.0
    n = spec.capacity + 1
    p, gain = spec.energy_probability, spec.harvest_amount
    # joint state index: 2 * level + request flag
    P = np.zeros((2 * n, 2 * n))
    for b in range(n):
        for flag in (0, 1):
            after = b - spec.transmit_cost if flag and b >= spec.transmit_cost else b
            for nxt, pe in ((min(after + gain, spec.capacity), p), (after, 1.0 - p)):
                P[2 * b + flag, 2 * nxt + 1] += pe * pr
                P[2 * b + flag, 2 * nxt] += pe * (1.0 - pr)
    pi_level = stationary_distribution(spec)
    pi = np.repeat(pi_level, 2) * np.tile([1.0 - pr, pr], n)
    h = np.zeros(2 * n)
    for b in range(n):
        h[2 * b + 1] = float(b < spec.transmit_cost) - eta
    h -= pi @ h
    Z = np.linalg.inv(np.eye(2 * n) - P + np.outer(np.ones(2 * n), pi))
    sigma2 = 2.0 * (pi * h) @ (Z @ h) - (pi * h) @ h
    return float(math.sqrt(max(sigma2, 0.0) / periods) / pr)


def transient_baseline(spec: ChainSpec, initial_level: int, horizon: int,
                       warmup: int = 0) -> dict:
    """Expected request counts of the baseline over a finite horizon.

    Propagates the exact law of the post-harvest level from a known start.
    """
    n = spec.capacity + 1
    p = spec.energy_probability
    dist = np.zeros(n)
    dist[initial_level] = 1.0
    # first period: harvest from the initial (pre-harvest) level
    post = np.zeros(n)
    for b in range(n):
        post[min(b + spec.harvest_amount, spec.capacity)] += dist[b] * p
        post[b] += dist[b] * (1.0 - p)
    P = transition_matrix(spec)
    total = macro = 0.0
    for t in range(horizon):
        if t >= warmup:
            total += spec.request_probability
            macro += spec.request_probability * post[: spec.transmit_cost].sum()
        post = post @ P
    return {"total_requests": float(total), "served_by_macro": float(macro),
            "eta": float(macro / total) if total > 0 else math.nan}


# --------------------------------------------------------------------------
# exhaustive enumeration
# --------------------------------------------------------------------------

COUNTERS = ("total_requests", "served_locally", "served_by_unicast", "served_by_macro",
            "pushes", "fetched_contents", "energy_arrived", "energy_spent",
            "energy_wasted")


@dataclass
class ExactResult:
    """Exact expectations of the run counters."""
    expected: dict = field(default_factory=lambda: dict.fromkeys(COUNTERS, 0.0))
    states_visited: int = 0

    @property
    def eta(self) -> float:
        """Ratio of expectations: E[macro] / E[requests]."""
        total = self.expected["total_requests"]
        if total == 0:
            return math.nan
        return self.expected["served_by_macro"] / total


def exhaustive_eta(config, max_states: int = 200_000) -> ExactResult:
    """Exact expected counters of `config` by enumerating all outcomes.

    Per period there are two energy outcomes and m + 1 request outcomes
    (none, or one of m ranks). Branches that reach the same battery level,
    cache and pushed set are merged, which keeps the enumeration exact while
    bounding its cost.
    """
    config.validate()
    m, horizon = config.initial_size, config.horizon
    if config.birth_rate != 0 or config.death_rate != 0:
        raise PreconditionError("exhaustive enumeration needs a frozen catalog")
    if m > MAX_CONTENTS or horizon > MAX_HORIZON:
        raise OracleTooLarge(
            f"{m} contents over {horizon} periods exceeds the enumeration bound "
            f"({MAX_CONTENTS} contents, {MAX_HORIZON} periods)")

    costs = config.costs
    params = config.threshold_params if config.cache_mode == "fetch" else None
    ranked = list(range(m))
    pmf = zipf_pmf(m, config.zipf_exponent) if m else np.zeros(0)
    p, pr = config.energy_probability, config.request_probability
    energy_branches = [(config.harvest_amount, p), (0, 1.0 - p)]
    request_branches = [(None, 1.0 - pr)] + [(i, pr * float(pmf[i])) for i in range(m)]
    if m == 0:
        request_branches = [(None, 1.0)]

    start_cached = frozenset(ranked) if config.cache_mode == "full" else frozenset()
    states = {(config.initial_level, start_cached, frozenset()): 1.0}
    result = ExactResult()
    exp = result.expected
    for t in range(horizon):
        observed = t >= config.warmup_periods
        nxt: dict = {}
        for (level, cached, pushed), weight in states.items():
            for arrival, pe in energy_branches:
                if pe == 0:
                    continue
                total = level + arrival
                charged = min(total, config.capacity)
                for request, pq in request_branches:
                    w = weight * pe * pq
                    if w == 0:
                        continue
                    local = request is not None and request in pushed
                    ota = None if local else request
                    cell = pol.CellState(Battery(charged, config.capacity),
                                         set(cached), set(pushed))
                    action = pol.decide(config.policy,
                                        pol.PolicyInput(ranked, cell, ota, costs), params)
                    spent = pol.cost(action, costs)
                    new_cached, new_pushed = cached, pushed
                    if isinstance(action, pol.Fetch):
                        new_cached = cached | set(action.ids)
                    elif isinstance(action, pol.Push):
                        new_pushed = pushed | {action.id}
                    key = (charged - spent, new_cached, new_pushed)
                    nxt[key] = nxt.get(key, 0.0) + w
                    if not observed:
                        continue
                    exp["energy_arrived"] += w * arrival
                    exp["energy_wasted"] += w * (total - charged)
                    exp["energy_spent"] += w * spent
                    if request is not None:
                        exp["total_requests"] += w
                        if local:
                            exp["served_locally"] += w
                        elif isinstance(action, pol.Unicast):
                            exp["served_by_unicast"] += w
                        else:
                            exp["served_by_macro"] += w
                    if isinstance(action, pol.Push):
                        exp["pushes"] += w
                    elif isinstance(action, pol.Fetch):
                        exp["fetched_contents"] += w * len(action.ids)
        states = nxt
        result.states_visited += len(states)
        if len(states) > max_states:
            raise OracleTooLarge(f"more than {max_states} distinct states at period {t}")
    return result
