"""Stochastic building blocks of the small-cell world.

Energy is counted in integer multiples of one unit. The battery clips at its
capacity and refuses to go negative. The content catalog is a ranked list
(position 0 is the most popular content) that evolves as a discrete-time
birth-death process, and requests pick a rank from a Zipf law evaluated
against the current catalog size.

Deaths are scheduled by drawing a geometric lifetime when a content enters
the catalog. Because the geometric law is memoryless this is the same
process as an independent Bernoulli(death_rate) trial per content per
period, but it lets every random draw of a run be made up front.
"""
from __future__ import annotations

import bisect
import heapq
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, EmptyCatalog, InsufficientEnergy

# death period of a content that never dies
NEVER = 2**62

SEED_LIMIT = 2**64


def make_rng(seed: int) -> np.random.Generator:
    """Return the PCG64 generator used for every run.

    PCG64 streams are specified bit-for-bit by numpy, so a seed reproduces
    the same draws on any platform.
    """
    if not 0 <= int(seed) < SEED_LIMIT:
        raise ConfigError(f"seed must fit in 64 unsigned bits, got {seed}")
    return np.random.Generator(np.random.PCG64(int(seed)))


def _check_probability(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise ConfigError(f"{name} must lie in [0, 1], got {value}")


def _check_units(name: str, value: int, minimum: int = 0) -> None:
    if int(value) != value or value < minimum:
        raise ConfigError(f"{name} must be an integer >= {minimum}, got {value}")


# --------------------------------------------------------------------------
# energy
# --------------------------------------------------------------------------

@dataclass
class Battery:
    level: int
    capacity: int

    def __post_init__(self):
        _check_units("capacity", self.capacity)
        _check_units("level", self.level)
        if self.level > self.capacity:
            raise ConfigError(
                f"battery level {self.level} exceeds capacity {self.capacity}")

    def charge(self, amount: int) -> int:
        """Add `amount` units and return how many overflowed."""
        total = self.level + amount
        self.level = min(total, self.capacity)
        return total - self.level

    def spend(self, amount: int) -> None:
        if amount < 0:
            raise ValueError(f"cannot spend a negative amount ({amount})")
        if amount > self.level:
            raise InsufficientEnergy(
                f"spending {amount} units with only {self.level} stored")
        self.level -= amount


@dataclass(frozen=True)
class EnergyProcess:
    """Bernoulli harvesting: `amount` units arrive with `probability`."""
    probability: float
    amount: int

    def __post_init__(self):
        _check_probability("energy arrival probability", self.probability)
        _check_units("harvest amount", self.amount)


@dataclass(frozen=True)
class EnergyCosts:
    """Per-action energy prices.

    `fetch_billing` selects how a multi-content fetch is charged:
    ``"per_content"`` bills `fetch_cost` for every fetched content,
    ``"per_period"`` bills `fetch_cost` once for the whole batch.
    """
    fetch_cost: int
    transmit_cost: int
    fetch_billing: str = "per_content"

    def __post_init__(self):
        _check_units("fetch cost", self.fetch_cost)
        _check_units("transmit cost", self.transmit_cost, minimum=1)
        if self.fetch_billing not in ("per_content", "per_period"):
            raise ConfigError(f"unknown fetch billing {self.fetch_billing!r}")

    def fetch_price(self, count: int) -> int:
        if count <= 0:
            return 0
        if self.fetch_billing == "per_period":
            return self.fetch_cost
        return count * self.fetch_cost


def harvest(battery: Battery, process: EnergyProcess, rng) -> tuple[Battery, int, int]:
    """One harvesting opportunity; returns ``(battery, arrived, wasted)``."""
    if rng.random() < process.probability:
        wasted = battery.charge(process.amount)
        return battery, process.amount, wasted
    return battery, 0, 0


def spend(battery: Battery, amount: int) -> Battery:
    battery.spend(amount)
    return battery


# --------------------------------------------------------------------------
# popularity and requests
# --------------------------------------------------------------------------

def zipf_pmf(m: int, v: float) -> np.ndarray:
    """Zipf probabilities of ranks 1..m with exponent `v`."""
    if m < 1:
        raise EmptyCatalog("Zipf popularity needs at least one content")
    weights = np.arange(1, m + 1, dtype=float) ** -float(v)
    return weights / weights.sum()


@dataclass
class ZipfPopularity:
    exponent: float
    _table: np.ndarray = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.exponent >= 0:
            raise ConfigError(f"Zipf exponent must be >= 0, got {self.exponent}")

    def pmf(self, m: int) -> np.ndarray:
        return zipf_pmf(m, self.exponent)

    def prefix(self, m: int) -> np.ndarray:
        """Unnormalised cumulative weights ``sum_{j<=i} j**-v`` for i = 1..m.

        The table is shared by every catalog size: the CDF for size m is the
        first m entries divided by entry m-1.
        """
        if self._table is None or len(self._table) < m:
            size = max(m, 64) if self._table is None else max(m, 2 * len(self._table))
            weights = np.arange(1, size + 1, dtype=float) ** -float(self.exponent)
            self._table = np.cumsum(weights)
        return self._table

    def sample_index(self, m: int, u: float) -> int:
        """0-based rank picked by inverting the CDF at the uniform `u`."""
        table = self.prefix(m)
        index = int(np.searchsorted(table[:m], u * table[m - 1], side="right"))
        return min(index, m - 1)


@dataclass(frozen=True)
class RequestProcess:
    probability: float

    def __post_init__(self):
        _check_probability("request probability", self.probability)


def sample_request(catalog: "Catalog", pop: ZipfPopularity, req: RequestProcess,
                   rng) -> Optional[int]:
    if len(catalog) == 0:
        return None
    if not rng.random() < req.probability:
        return None
    return catalog.ranked[pop.sample_index(len(catalog), rng.random())]


# --------------------------------------------------------------------------
# catalog
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Content:
    id: int
    birth_period: int
    death_period: int = NEVER


def draw_lifetime(rng, death_rate: float) -> int:
    if death_rate <= 0:
        return NEVER
    return int(rng.geometric(death_rate))


class Catalog:
    """Active contents ordered by popularity rank.

    `ranked[i]` is the id of the content with rank i + 1. Ids come from a
    counter and are never reused.

    Each content carries a popularity key in [0, 1) and ranks follow
    ascending keys. A newborn with a fresh uniform key lands in each of the
    m + 1 slots with probability 1/(m + 1), independently of the current
    order, so keyed insertion is the uniform-slot insertion rule; the keys
    only make the choice reproducible by other implementations.
    """

    def __init__(self, birth_rate: float, death_rate: float):
        if not birth_rate >= 0:
            raise ConfigError(f"birth rate must be >= 0, got {birth_rate}")
        _check_probability("death rate", death_rate)
        self.birth_rate = birth_rate
        self.death_rate = death_rate
        self.ranked: list[int] = []
        self.keys: list[float] = []
        self.contents: dict[int, Content] = {}
        self.next_id = 0
        self._deaths: list[tuple[int, int]] = []

    def __len__(self):
        return len(self.ranked)

    def __contains__(self, content_id):
        return content_id in self.contents

    def ids(self) -> list[int]:
        return list(self.ranked)

    def rank_of(self, content_id: int) -> int:
        return self.ranked.index(content_id) + 1

    def _create(self, birth_period: int, lifetime: int) -> Content:
        death = NEVER if lifetime >= NEVER else birth_period + int(lifetime)
        content = Content(self.next_id, birth_period, death)
        self.next_id += 1
        self.contents[content.id] = content
        if death < NEVER:
            heapq.heappush(self._deaths, (death, content.id))
        return content

    def add(self, key: float, birth_period: int, lifetime: int = NEVER) -> Content:
        """Create a content ranked by popularity key `key`."""
        content = self._create(birth_period, lifetime)
        # ties go behind older contents
        slot = bisect.bisect_right(self.keys, key)
        self.keys.insert(slot, key)
        self.ranked.insert(slot, content.id)
        return content

    def insert(self, slot: int, birth_period: int, lifetime: int = NEVER) -> Content:
        """Create a content at 0-based rank position `slot`."""
        if not 0 <= slot <= len(self.ranked):
            raise IndexError(f"slot {slot} outside 0..{len(self.ranked)}")
        lower = self.keys[slot - 1] if slot > 0 else 0.0
        upper = self.keys[slot] if slot < len(self.keys) else 1.0
        content = self._create(birth_period, lifetime)
        self.keys.insert(slot, (lower + upper) / 2)
        self.ranked.insert(slot, content.id)
        return content

    def expire(self, period: int) -> set[int]:
        """Remove every content whose death period is at or before `period`."""
        died = set()
        while self._deaths and self._deaths[0][0] <= period:
            _, cid = heapq.heappop(self._deaths)
            died.add(cid)
        if died:
            kept = [(k, cid) for k, cid in zip(self.keys, self.ranked) if cid not in died]
            self.keys = [k for k, _ in kept]
            self.ranked = [cid for _, cid in kept]
            for cid in died:
                del self.contents[cid]
        return died

    @classmethod
    def seeded(cls, birth_rate: float, death_rate: float, keys: Sequence[float],
               lifetimes: Sequence[int]) -> "Catalog":
        """Initial catalog with one content per key.

        Initial contents count as born in period -1, so a content with
        lifetime L is removed at the start of period L - 1.
        """
        catalog = cls(birth_rate, death_rate)
        for key, life in zip(keys, lifetimes):
            catalog.add(float(key), -1, int(life))
        return catalog


def initial_catalog_size(birth_rate: float, death_rate: float) -> int:
    """Mean of the stationary catalog size, rounded half up."""
    if death_rate <= 0:
        return 0
    return int(birth_rate / death_rate + 0.5)


def catalog_step(catalog: Catalog, period: int, rng) -> tuple[Catalog, set[int]]:
    """Advance the catalog by one period: deaths first, then Poisson births.

    Each newborn lands in a uniformly chosen slot of the catalog as it stands
    after the deaths and any earlier newborns of the same period.
    """
    died = catalog.expire(period)
    births = int(rng.poisson(catalog.birth_rate))
    for _ in range(births):
        key = rng.random()
        catalog.add(key, period, draw_lifetime(rng, catalog.death_rate))
    return catalog, died


__all__ = [
    "NEVER", "Battery", "EnergyProcess", "EnergyCosts", "harvest", "spend",
    "zipf_pmf", "ZipfPopularity", "RequestProcess", "sample_request",
    "Content", "Catalog", "catalog_step", "draw_lifetime", "make_rng",
    "initial_catalog_size",
]
