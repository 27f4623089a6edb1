"""Scheduling policies of the small cell.

A policy looks at one period's state and returns a single action: fetch a
batch of contents into the cache, push one cached content to all users,
unicast the content a user asked for, or stay idle. Policies are plain
functions with no memory; the engine owns all state and executes whatever
the policy returns.

Over-the-air requests are handled before any proactive work. When a request
reaches the cell and cannot be served (content not cached, or not enough
energy), the macro base station takes it and the cell idles for that
period.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

from .errors import ConfigError
from .model import Battery, EnergyCosts


@dataclass
class CellState:
    """Battery plus the cached and pushed content sets.

    Invariant: ``pushed <= cached <= active ids``.
    """
    battery: Battery
    cached: set
    pushed: set

    def prune(self, died) -> None:
        self.cached.difference_update(died)
        self.pushed.difference_update(died)


@dataclass(frozen=True)
class Fetch:
    ids: tuple


@dataclass(frozen=True)
class Push:
    id: int


@dataclass(frozen=True)
class Unicast:
    id: int


@dataclass(frozen=True)
class Idle:
    pass


IDLE = Idle()

Action = Union[Fetch, Push, Unicast, Idle]


def describe(action: Action) -> str:
    """Short text form, also used by scenario scripts."""
    if isinstance(action, Fetch):
        return "fetch:" + ",".join(str(i) for i in action.ids)
    if isinstance(action, Push):
        return f"push:{action.id}"
    if isinstance(action, Unicast):
        return f"unicast:{action.id}"
    return "idle"


@dataclass(frozen=True)
class ThresholdParams:
    fetch_threshold: int
    push_threshold: int
    max_fetch: int = 3

    def validate(self, costs: EnergyCosts) -> None:
        if self.max_fetch < 1:
            raise ConfigError(f"max_fetch must be >= 1, got {self.max_fetch}")
        if self.fetch_threshold < costs.fetch_cost:
            raise ConfigError(
                f"fetch threshold {self.fetch_threshold} is below the fetch cost "
                f"{costs.fetch_cost}")
        if self.push_threshold < costs.transmit_cost:
            raise ConfigError(
                f"push threshold {self.push_threshold} is below the transmit cost "
                f"{costs.transmit_cost}")


@dataclass
class PolicyInput:
    ranked: Sequence[int]
    cell: CellState
    request: Optional[int]
    costs: EnergyCosts

    @property
    def level(self) -> int:
        return self.cell.battery.level


def cost(action: Action, costs: EnergyCosts) -> int:
    if isinstance(action, Fetch):
        return costs.fetch_price(len(action.ids))
    if isinstance(action, (Push, Unicast)):
        return costs.transmit_cost
    return 0


def affordable(action: Action, battery: Battery, costs: EnergyCosts) -> bool:
    return battery.level >= cost(action, costs)


def _first_unpushed(inp: PolicyInput) -> Optional[int]:
    cached, pushed = inp.cell.cached, inp.cell.pushed
    for cid in inp.ranked:
        if cid in cached and cid not in pushed:
            return cid
    return None


def _serve(inp: PolicyInput) -> Optional[Action]:
    """Unicast for a servable request, IDLE for an unservable one.

    Returns None when there is no over-the-air request, leaving the period
    free for proactive work.
    """
    if inp.request is None:
        return None
    if inp.request in inp.cell.cached and inp.level >= inp.costs.transmit_cost:
        return Unicast(inp.request)
    return IDLE


def _fetch_batch(inp: PolicyInput, params: ThresholdParams) -> Action:
    if inp.level < params.fetch_threshold:
        return IDLE
    costs = inp.costs
    k = min(params.max_fetch, len(inp.ranked) - len(inp.cell.cached))
    if costs.fetch_billing == "per_content" and costs.fetch_cost > 0:
        k = min(k, inp.level // costs.fetch_cost)
    if k <= 0:
        return IDLE
    cached = inp.cell.cached
    batch = []
    for cid in inp.ranked:
        if cid not in cached:
            batch.append(cid)
            if len(batch) == k:
                break
    return Fetch(tuple(batch))


def _wants_fetch(n_pushed: int, n_cached: int, n_active: int) -> bool:
    """Fetch when the pushed share of the cache is at least the cached share
    of the catalog. An empty cache always fetches; a full cache never does.
    """
    if n_cached == 0:
        return True
    if n_cached >= n_active:
        return False
    # r1 >= r2  <=>  pushed/cached >= cached/active, in exact integers
    return n_pushed * n_active >= n_cached * n_cached


def decide_baseline(inp: PolicyInput, params: Optional[ThresholdParams] = None) -> Action:
    """Reactive service only: unicast when possible, never push.

    With `params` (caching configuration) the cell also fetches the way the
    threshold policy does with an empty pushed set, which in practice means
    it refills the cache only once the cache has emptied.
    """
    served = _serve(inp)
    if served is not None:
        return served
    if params is None or not inp.ranked:
        return IDLE
    if _wants_fetch(0, len(inp.cell.cached), len(inp.ranked)):
        return _fetch_batch(inp, params)
    return IDLE


def decide_push_only(inp: PolicyInput) -> Action:
    served = _serve(inp)
    if served is not None:
        return served
    if inp.level < inp.costs.transmit_cost:
        return IDLE
    target = _first_unpushed(inp)
    return IDLE if target is None else Push(target)


def decide_threshold(inp: PolicyInput, params: ThresholdParams) -> Action:
    served = _serve(inp)
    if served is not None:
        return served
    if not inp.ranked:
        return IDLE
    n_cached = len(inp.cell.cached)
    if _wants_fetch(len(inp.cell.pushed), n_cached, len(inp.ranked)):
        return _fetch_batch(inp, params)
    if inp.level < params.push_threshold:
        return IDLE
    target = _first_unpushed(inp)
    return IDLE if target is None else Push(target)


POLICIES = ("baseline", "push_only", "threshold")


def decide(policy: str, inp: PolicyInput, params: Optional[ThresholdParams] = None) -> Action:
    if policy == "baseline":
        return decide_baseline(inp, params)
    if policy == "push_only":
        return decide_push_only(inp)
    if policy == "threshold":
        return decide_threshold(inp, params)
    raise ConfigError(f"unknown policy {policy!r}")
