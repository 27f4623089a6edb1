import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ehcell.errors import ConfigError, EmptyCatalog, InsufficientEnergy
from ehcell.model import (
    NEVER, Battery, Catalog, EnergyCosts, EnergyProcess, RequestProcess, ZipfPopularity,
    catalog_step, harvest, initial_catalog_size, make_rng, sample_request, spend, zipf_pmf,
)


class StubRng:
    """Replays fixed draws for the catalog and request functions."""

    def __init__(self, uniforms=(), poisson=0):
        self.uniforms = list(uniforms)
        self.poisson_value = poisson

    def random(self):
        return self.uniforms.pop(0)

    def poisson(self, lam):
        return self.poisson_value

    def geometric(self, p):
        return 1


# -- zipf ---------------------------------------------------------------------

def test_zipf_uniform_when_exponent_zero():
    np.testing.assert_allclose(zipf_pmf(3, 0), [1 / 3] * 3, rtol=0, atol=1e-15)


def test_zipf_single_content():
    assert zipf_pmf(1, 1.7).tolist() == [1.0]


def test_zipf_two_contents_derived():
    # H = 1 + 1/2, so f1 = 2/3 and f2 = 1/3
    np.testing.assert_allclose(zipf_pmf(2, 1), [2 / 3, 1 / 3], rtol=0, atol=1e-15)


def test_zipf_empty_catalog():
    with pytest.raises(EmptyCatalog):
        zipf_pmf(0, 1)


@pytest.mark.parametrize("v", [0, 0.5, 1, 2])
def test_zipf_normalised_and_non_increasing(v):
    for m in range(1, 1001):
        f = zipf_pmf(m, v)
        assert abs(f.sum() - 1) <= 1e-12
        assert np.all(np.diff(f) <= 0)


def test_prefix_table_matches_pmf():
    pop = ZipfPopularity(1.3)
    for m in (1, 5, 200):
        table = pop.prefix(m)[:m]
        np.testing.assert_allclose(table / table[-1], np.cumsum(zipf_pmf(m, 1.3)), atol=1e-12)


def test_negative_exponent_rejected():
    with pytest.raises(ConfigError):
        ZipfPopularity(-0.1)


# -- requests -----------------------------------------------------------------

def _catalog(n):
    cat = Catalog(0, 0)
    for i in range(n):
        cat.insert(i, -1)
    return cat


def test_no_requests_when_probability_zero():
    rng = make_rng(3)
    cat = _catalog(4)
    assert all(sample_request(cat, ZipfPopularity(1), RequestProcess(0.0), rng) is None
               for _ in range(200))


def test_request_inverts_cdf():
    # u = 0.5 < 2/3 picks rank 1
    cat = _catalog(2)
    got = sample_request(cat, ZipfPopularity(1), RequestProcess(1.0), StubRng([0.0, 0.5]))
    assert got == cat.ranked[0]
    got = sample_request(cat, ZipfPopularity(1), RequestProcess(1.0), StubRng([0.0, 0.7]))
    assert got == cat.ranked[1]


def test_empty_catalog_never_requests():
    assert sample_request(Catalog(0, 0), ZipfPopularity(1), RequestProcess(1.0),
                          StubRng()) is None


def test_request_frequency_within_three_sigma():
    rng = make_rng(11)
    cat, pop, req = _catalog(10), ZipfPopularity(1), RequestProcess(0.3)
    n = 20_000
    hits = sum(sample_request(cat, pop, req, rng) is not None for _ in range(n))
    assert abs(hits / n - 0.3) <= 3 * math.sqrt(0.3 * 0.7 / n)


def test_request_ranks_follow_zipf():
    rng = make_rng(5)
    cat, pop, req = _catalog(4), ZipfPopularity(1), RequestProcess(1.0)
    n = 40_000
    counts = np.bincount([cat.rank_of(sample_request(cat, pop, req, rng)) - 1
                          for _ in range(n)], minlength=4)
    f = zipf_pmf(4, 1)
    assert np.all(np.abs(counts / n - f) <= 4 * np.sqrt(f * (1 - f) / n))


# -- catalog ------------------------------------------------------------------

def test_frozen_catalog_unchanged():
    cat = _catalog(5)
    before = cat.ids()
    for t in range(50):
        cat, died = catalog_step(cat, t, make_rng(t))
        assert died == set()
    assert cat.ids() == before


def test_certain_death_removes_everything():
    rng = make_rng(0)
    cat = Catalog.seeded(0.0, 1.0, rng.random(6), rng.geometric(1.0, 6))
    ids = set(cat.ids())
    cat, died = catalog_step(cat, 0, rng)
    assert died == ids and len(cat) == 0


def test_newborn_at_slot_zero_goes_first():
    cat = Catalog(1.0, 0.0)
    a = cat.insert(0, -1).id
    b = cat.insert(1, -1).id
    # one birth with key 0.0 lands ahead of every existing key
    cat, died = catalog_step(cat, 0, StubRng([0.0], poisson=1))
    c = max(cat.ids())
    assert cat.ids() == [c, a, b] and died == set()


def test_ids_never_reused():
    rng = make_rng(8)
    cat = Catalog(2.0, 0.3)
    seen = set()
    for t in range(300):
        before = set(cat.ids())
        cat, died = catalog_step(cat, t, rng)
        new = set(cat.ids()) - before
        assert not (new & seen)
        seen |= new
        assert died <= before


def test_ranks_stay_a_permutation():
    rng = make_rng(2)
    cat = Catalog(3.0, 0.05)
    for t in range(500):
        cat, _ = catalog_step(cat, t, rng)
        assert sorted(cat.rank_of(c) for c in cat.ids()) == list(range(1, len(cat) + 1))
        assert cat.keys == sorted(cat.keys)


def test_stationary_catalog_size():
    rng = make_rng(21)
    cat = Catalog(1.0, 1e-3)
    n0 = initial_catalog_size(1.0, 1e-3)
    keys, lives = rng.random(n0), rng.geometric(1e-3, n0)
    cat = Catalog.seeded(1.0, 1e-3, keys, lives)
    sizes = []
    for t in range(100_000):
        cat, _ = catalog_step(cat, t, rng)
        sizes.append(len(cat))
    assert n0 == 1000
    assert abs(np.mean(sizes) - 1000) / 1000 < 0.10


def test_initial_size_rounds_half_up():
    assert initial_catalog_size(3, 1e-3) == 3000
    assert initial_catalog_size(0.1, 1e-3) == 100
    assert initial_catalog_size(1, 0.4) == 3  # 2.5 rounds up
    assert initial_catalog_size(1, 0) == 0


def test_geometric_lifetime_matches_per_period_death():
    # a content dies in its first period with probability mu
    rng = make_rng(4)
    mu = 0.2
    lives = rng.geometric(mu, 50_000)
    assert abs(np.mean(lives == 1) - mu) < 0.01
    assert lives.min() >= 1


def test_never_dying_content():
    cat = Catalog(0, 0)
    content = cat.add(0.5, 0)
    assert content.death_period == NEVER
    assert cat.expire(10**9) == set()


# -- energy -------------------------------------------------------------------

class Always:
    def random(self):
        return 0.0


def test_harvest_below_cap():
    battery, arrived, wasted = harvest(Battery(4, 10), EnergyProcess(1.0, 3), Always())
    assert (battery.level, arrived, wasted) == (7, 3, 0)


def test_harvest_overflow_is_wasted():
    battery, arrived, wasted = harvest(Battery(9, 10), EnergyProcess(1.0, 3), Always())
    assert (battery.level, arrived, wasted) == (10, 3, 2)


def test_no_harvest_when_probability_zero():
    battery, arrived, wasted = harvest(Battery(5, 10), EnergyProcess(0.0, 3), make_rng(1))
    assert (battery.level, arrived, wasted) == (5, 0, 0)


@pytest.mark.parametrize("level,amount,left", [(6, 2, 4), (2, 2, 0)])
def test_spend(level, amount, left):
    assert spend(Battery(level, 10), amount).level == left


def test_spend_beyond_level_raises():
    with pytest.raises(InsufficientEnergy):
        spend(Battery(1, 10), 2)


def test_battery_rejects_bad_levels():
    with pytest.raises(ConfigError):
        Battery(11, 10)
    with pytest.raises(ConfigError):
        Battery(-1, 10)


def test_costs_validation():
    with pytest.raises(ConfigError):
        EnergyCosts(1, 0)
    with pytest.raises(ConfigError):
        EnergyCosts(-1, 2)
    assert EnergyCosts(1, 2).fetch_price(3) == 3
    assert EnergyCosts(1, 2, "per_period").fetch_price(3) == 1


@settings(max_examples=300, deadline=None)
@given(capacity=st.integers(1, 30), start=st.integers(0, 30),
       ops=st.lists(st.tuples(st.booleans(), st.integers(0, 12)), max_size=60))
def test_battery_bounds_and_ledger(capacity, start, ops):
    start = min(start, capacity)
    battery = Battery(start, capacity)
    arrived = spent = wasted = 0
    for is_charge, amount in ops:
        if is_charge:
            wasted += battery.charge(amount)
            arrived += amount
        elif amount <= battery.level:
            battery.spend(amount)
            spent += amount
        else:
            with pytest.raises(InsufficientEnergy):
                battery.spend(amount)
        assert 0 <= battery.level <= capacity
        assert battery.level == start + arrived - spent - wasted


def test_seed_reproducible_and_bounded():
    assert make_rng(7).random(5).tolist() == make_rng(7).random(5).tolist()
    with pytest.raises(ConfigError):
        make_rng(2**64)
