import math

import numpy as np
import pytest

from ehcell.engine import WorldConfig
from ehcell.errors import ConfigError, OracleTooLarge, PreconditionError
from ehcell.oracle import (
    ChainSpec, eta_standard_error, exact_eta_baseline, exhaustive_eta,
    stationary_distribution, transient_baseline, transition_matrix,
)


def tiny(**kw):
    base = dict(birth_rate=0.0, death_rate=0.0, initial_contents=1, horizon=2, warmup=0)
    base.update(kw)
    return WorldConfig(**base)


# -- stationary chain ---------------------------------------------------------------

def test_two_state_chain():
    # the pre-harvest level is always 0, so the cell can serve iff energy arrived
    assert exact_eta_baseline(ChainSpec(2, 0.5, 2, 2, 1.0)) == pytest.approx(0.5, abs=1e-12)


def test_hand_solved_four_level_chain():
    # capacity 3, harvest 2, cost 1, every period a request:
    # pi3 = pi2, pi1 = pi2 / 2, pi0 = pi1, so pi0 = 1/6
    assert exact_eta_baseline(ChainSpec(3, 0.5, 2, 1, 1.0)) == pytest.approx(1 / 6, abs=1e-12)


def test_hand_solved_chain_with_sparse_requests():
    # levels {0, 2}: pi0 = pi0 / 2 + pi2 / 4, so pi0 = 1/3
    assert exact_eta_baseline(ChainSpec(2, 0.5, 2, 2, 0.5)) == pytest.approx(1 / 3, abs=1e-12)


def test_certain_energy_never_falls_back():
    assert exact_eta_baseline(ChainSpec(10, 1.0, 3, 2, 0.75)) == pytest.approx(0, abs=1e-12)


def test_no_energy_always_falls_back():
    assert exact_eta_baseline(ChainSpec(10, 0.0, 3, 2, 0.75)) == 1.0
    with pytest.raises(PreconditionError):
        stationary_distribution(ChainSpec(10, 0.0, 3, 2, 0.75))


def test_chain_spec_validation():
    with pytest.raises(ConfigError):
        ChainSpec(1, 0.5, 3, 2, 0.5)
    with pytest.raises(ConfigError):
        ChainSpec(5, 1.5, 3, 2, 0.5)


@pytest.mark.parametrize("spec", [ChainSpec(10, 0.5, 3, 2, 0.75), ChainSpec(20, 0.1, 1, 4, 0.9),
                                  ChainSpec(7, 0.9, 5, 3, 0.2)])
def test_stationary_residual(spec):
    P = transition_matrix(spec)
    np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-14)
    pi = stationary_distribution(spec)
    assert abs(pi.sum() - 1) <= 1e-10 and pi.min() >= 0
    assert np.abs(pi @ P - pi).max() <= 1e-10


@pytest.mark.parametrize("harvest,cost,pr", [(3, 2, 0.75), (1, 2, 0.5), (2, 3, 0.9)])
def test_eta_monotone_in_capacity_and_probability(harvest, cost, pr):
    grid = np.array([[exact_eta_baseline(ChainSpec(cap, p, harvest, cost, pr))
                      for cap in range(cost, 21)]
                     for p in np.arange(1, 10) / 10])
    assert np.all(np.diff(grid, axis=1) <= 1e-12)
    assert np.all(np.diff(grid, axis=0) <= 1e-12)


def test_standard_error_of_independent_periods_is_binomial():
    # two-state chain: fallbacks are i.i.d. Bernoulli(1/2)
    n = 10_000
    assert eta_standard_error(ChainSpec(2, 0.5, 2, 2, 1.0), n) == pytest.approx(
        math.sqrt(0.25 / n), rel=1e-9)


def test_standard_error_grows_with_drought_clustering():
    spec = ChainSpec(10, 0.5, 3, 2, 0.75)
    eta = exact_eta_baseline(spec)
    binomial = math.sqrt(eta * (1 - eta) / (0.75 * 1e6))
    assert eta_standard_error(spec, 10**6) > 1.5 * binomial


# -- exhaustive enumeration ------------------------------------------------------------

def test_exhaustive_without_requests_has_no_eta():
    res = exhaustive_eta(tiny(request_probability=0.0, horizon=5))
    assert res.expected["total_requests"] == 0 and math.isnan(res.eta)


def test_exhaustive_push_only_with_certain_energy():
    cfg = tiny(energy_probability=1.0, harvest_amount=2, transmit_cost=2, capacity=4,
               request_probability=1.0, policy="push_only", horizon=3)
    res = exhaustive_eta(cfg)
    assert res.expected["served_by_macro"] == 0
    assert res.expected["total_requests"] == 3


def test_exhaustive_push_only_pushes_then_serves_locally():
    # no requests in period 0 pushes the only content; afterwards every request is local
    cfg = tiny(energy_probability=1.0, harvest_amount=2, transmit_cost=2, capacity=4,
               request_probability=0.5, policy="push_only", horizon=4)
    res = exhaustive_eta(cfg)
    assert res.expected["served_by_macro"] == 0
    assert res.expected["total_requests"] == pytest.approx(2.0)


def test_exhaustive_four_branch_example():
    cfg = tiny(energy_probability=0.5, harvest_amount=2, transmit_cost=2, capacity=2,
               request_probability=1.0, horizon=2)
    res = exhaustive_eta(cfg)
    # each period serves iff energy arrived: E[macro] = 1 of 2 requests
    assert res.expected["total_requests"] == pytest.approx(2.0)
    assert res.expected["served_by_macro"] == pytest.approx(1.0)
    assert res.eta == pytest.approx(0.5)
    spec = ChainSpec(2, 0.5, 2, 2, 1.0)
    assert transient_baseline(spec, 0, 2)["eta"] == pytest.approx(res.eta, abs=1e-12)


@pytest.mark.parametrize("start,horizon,warmup", [(0, 8, 0), (3, 10, 2), (10, 12, 5)])
def test_exhaustive_matches_transient_chain(start, horizon, warmup):
    cfg = tiny(energy_probability=0.4, harvest_amount=3, transmit_cost=2, capacity=10,
               request_probability=0.6, initial_level=start, horizon=horizon, warmup=warmup)
    res = exhaustive_eta(cfg)
    chain = transient_baseline(ChainSpec(10, 0.4, 3, 2, 0.6), start, horizon, warmup)
    assert res.expected["served_by_macro"] == pytest.approx(chain["served_by_macro"], abs=1e-12)
    assert res.expected["total_requests"] == pytest.approx(chain["total_requests"], abs=1e-12)


def test_exhaustive_energy_ledger_in_expectation():
    cfg = tiny(energy_probability=0.5, harvest_amount=3, transmit_cost=2, fetch_cost=1,
               capacity=5, request_probability=0.7, initial_contents=3, policy="threshold",
               cache_mode="fetch", horizon=8)
    e = exhaustive_eta(cfg).expected
    assert e["total_requests"] == pytest.approx(
        e["served_locally"] + e["served_by_unicast"] + e["served_by_macro"])
    assert e["energy_arrived"] == pytest.approx(0.5 * 3 * 8)


def test_exhaustive_bounds():
    with pytest.raises(OracleTooLarge):
        exhaustive_eta(tiny(initial_contents=4))
    with pytest.raises(OracleTooLarge):
        exhaustive_eta(tiny(horizon=13))
    with pytest.raises(PreconditionError):
        exhaustive_eta(WorldConfig(birth_rate=0.1, death_rate=0.5, horizon=3, warmup=0))


def test_exhaustive_state_bound():
    cfg = tiny(initial_contents=3, policy="threshold", cache_mode="fetch", horizon=12,
               capacity=12, request_probability=0.5)
    with pytest.raises(OracleTooLarge):
        exhaustive_eta(cfg, max_states=5)
