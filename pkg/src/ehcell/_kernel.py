"""Compiled period loop.

A port of :class:`ehcell.engine.Simulation` to flat arrays. Every content
that will ever exist is known once the draws are made, so contents are
sorted by popularity key once and each gets a fixed position in that global
order. Three Fenwick trees over those positions count the active contents,
the cached-but-unpushed ones, and the active uncached ones. Rank lookups,
"most popular unpushed" and "most popular uncached" then take O(log N),
whatever the catalog size.

The test suite checks that this loop and the reference loop produce
identical counters for identical draws.
"""
import numba
import numpy as np

from .model import NEVER, ZipfPopularity

BASELINE, PUSH_ONLY, THRESHOLD = 0, 1, 2
POLICY_CODES = {"baseline": BASELINE, "push_only": PUSH_ONLY, "threshold": THRESHOLD}

# counter layout, same field order as engine.Metrics
N_COUNTERS = 12
(TOTAL, LOCAL, UNICAST, MACRO, PUSHES, FETCHED, ARRIVED, SPENT, WASTED,
 PERIODS, LEVEL0, LEVEL1) = range(N_COUNTERS)

UNCACHED, CACHED, PUSHED, GONE = 0, 1, 2, 3


@numba.njit(cache=True, inline="always")
def _add(tree, i, delta):
    n = tree.shape[0] - 1
    i += 1
    while i <= n:
        tree[i] += delta
        i += i & -i


@numba.njit(cache=True, inline="always")
def _kth(tree, k, top_bit):
    """0-based position holding the k-th (1-based) marked item."""
    pos = 0
    step = top_bit
    n = tree.shape[0] - 1
    while step > 0:
        nxt = pos + step
        if nxt <= n and tree[nxt] < k:
            pos = nxt
            k -= tree[nxt]
        step >>= 1
    return pos


@numba.njit(cache=True)
def _simulate(policy, full_cache, per_period_billing, harvest, fetch_cost,
              transmit_cost, capacity, level, fetch_threshold, push_threshold,
              max_fetch, warmup, horizon, pos_of, n0, deaths_ptr, deaths_pos,
              energy, request, request_u, births, prefix):
    n = pos_of.shape[0]
    top_bit = 1
    while top_bit * 2 <= n:
        top_bit *= 2

    state = np.full(n, GONE, np.int8)
    active = np.zeros(n + 1, np.int64)
    fresh = np.zeros(n + 1, np.int64)      # cached, not yet pushed
    missing = np.zeros(n + 1, np.int64)    # active, not cached
    m = 0
    n_cached = 0
    n_pushed = 0
    for cid in range(n0):
        g = pos_of[cid]
        _add(active, g, 1)
        m += 1
        if full_cache:
            state[g] = CACHED
            _add(fresh, g, 1)
            n_cached += 1
        else:
            state[g] = UNCACHED
            _add(missing, g, 1)

    batch = np.empty(max(max_fetch, 1), np.int64)
    out = np.zeros(N_COUNTERS, np.int64)
    next_id = n0

    for t in range(horizon):
        start_level = level
        # 1-2: deaths and pruning, then births
        for d in range(deaths_ptr[t], deaths_ptr[t + 1]):
            g = deaths_pos[d]
            s = state[g]
            _add(active, g, -1)
            m -= 1
            if s == UNCACHED:
                _add(missing, g, -1)
            else:
                n_cached -= 1
                if s == CACHED:
                    _add(fresh, g, -1)
                else:
                    n_pushed -= 1
            state[g] = GONE
        for _ in range(births[t]):
            g = pos_of[next_id]
            _add(active, g, 1)
            m += 1
            if full_cache:
                state[g] = CACHED
                _add(fresh, g, 1)
                n_cached += 1
            else:
                state[g] = UNCACHED
                _add(missing, g, 1)
            next_id += 1

        # 3: harvest
        arrived = 0
        wasted = 0
        if energy[t]:
            arrived = harvest
            total = level + harvest
            level = total if total < capacity else capacity
            wasted = total - level

        # 4: request rank by CDF inversion (first index with prefix > target)
        req = -1
        if request[t] and m > 0:
            target = request_u[t] * prefix[m - 1]
            lo = 0
            hi = m
            while lo < hi:
                mid = (lo + hi) // 2
                if prefix[mid] > target:
                    hi = mid
                else:
                    lo = mid + 1
            if lo > m - 1:
                lo = m - 1
            req = _kth(active, lo + 1, top_bit)

        # 5: local storage (req and ota are global positions)
        local = req >= 0 and state[req] == PUSHED
        ota = -1 if local else req

        # 6: decide (0 idle, 1 fetch, 2 push, 3 unicast)
        kind = 0
        chosen = -1
        k = 0
        if ota >= 0:
            if state[ota] == CACHED and level >= transmit_cost:
                kind = 3
        elif m > 0:
            wants_fetch = False
            wants_push = False
            if policy == PUSH_ONLY:
                wants_push = level >= transmit_cost
            elif policy == THRESHOLD or (policy == BASELINE and not full_cache):
                shown_pushed = n_pushed if policy == THRESHOLD else 0
                if n_cached == 0:
                    wants_fetch = True
                elif n_cached >= m:
                    wants_fetch = False
                else:
                    wants_fetch = shown_pushed * m >= n_cached * n_cached
                if not wants_fetch and policy == THRESHOLD:
                    wants_push = level >= push_threshold
            if wants_fetch and level >= fetch_threshold:
                k = max_fetch
                if m - n_cached < k:
                    k = m - n_cached
                if not per_period_billing and fetch_cost > 0:
                    if level // fetch_cost < k:
                        k = level // fetch_cost
                if k > 0:
                    for i in range(k):
                        batch[i] = _kth(missing, i + 1, top_bit)
                    kind = 1
            elif wants_push and n_cached > n_pushed:
                chosen = _kth(fresh, 1, top_bit)
                kind = 2

        # execute
        spent = 0
        if kind == 1:
            spent = fetch_cost if per_period_billing else k * fetch_cost
            for i in range(k):
                g = batch[i]
                state[g] = CACHED
                _add(missing, g, -1)
                _add(fresh, g, 1)
            n_cached += k
        elif kind == 2:
            spent = transmit_cost
            state[chosen] = PUSHED
            _add(fresh, chosen, -1)
            n_pushed += 1
        elif kind == 3:
            spent = transmit_cost
        level -= spent

        # 7: counters
        if t >= warmup:
            if t == warmup:
                out[LEVEL0] = start_level
            out[PERIODS] += 1
            out[ARRIVED] += arrived
            out[WASTED] += wasted
            out[SPENT] += spent
            if req >= 0:
                out[TOTAL] += 1
                if local:
                    out[LOCAL] += 1
                elif kind == 3:
                    out[UNICAST] += 1
                else:
                    out[MACRO] += 1
            if kind == 2:
                out[PUSHES] += 1
            elif kind == 1:
                out[FETCHED] += k
            out[LEVEL1] = level
    return out


def death_schedule(draws, horizon: int):
    """Removal period of every content, grouped by period.

    Returns ``(ptr, ids)`` where ``ids[ptr[t]:ptr[t+1]]`` are the contents
    removed at the start of period t. Initial contents count as born in
    period -1.
    """
    n0 = len(draws.initial_keys)
    born = np.repeat(np.arange(horizon, dtype=np.int64), draws.births)
    death = np.empty(n0 + len(born), dtype=np.int64)
    death[:n0] = np.where(draws.initial_lifetimes >= NEVER, NEVER,
                          draws.initial_lifetimes - 1)
    death[n0:] = np.where(draws.lifetimes >= NEVER, NEVER, born + draws.lifetimes)
    dying = np.flatnonzero(death < horizon)
    dying = dying[np.argsort(death[dying], kind="stable")]
    ptr = np.zeros(horizon + 1, dtype=np.int64)
    np.cumsum(np.bincount(death[dying], minlength=horizon), out=ptr[1:])
    return ptr, dying


def run_draws(config, draws) -> np.ndarray:
    """Run the compiled loop for a validated config and its draws."""
    horizon = int(config.horizon)
    keys = np.concatenate([draws.initial_keys, draws.keys])
    # stable sort: equal keys rank the older content first
    order = np.argsort(keys, kind="stable")
    pos_of = np.empty(len(order), dtype=np.int64)
    pos_of[order] = np.arange(len(order))
    ptr, dying = death_schedule(draws, horizon)
    prefix = ZipfPopularity(config.zipf_exponent).prefix(max(len(order), 1))
    params = config.threshold_params
    return _simulate(
        POLICY_CODES[config.policy], config.cache_mode == "full",
        config.fetch_billing == "per_period", int(config.harvest_amount),
        int(config.fetch_cost), int(config.transmit_cost), int(config.capacity),
        int(config.initial_level), int(params.fetch_threshold),
        int(params.push_threshold), int(params.max_fetch),
        int(config.warmup_periods), horizon, pos_of, len(draws.initial_keys),
        ptr, pos_of[dying], draws.energy, draws.request, draws.request_u,
        draws.births, prefix)
