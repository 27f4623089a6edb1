"""Quick agreement checks between the engine, the oracle and the Fig. 2 trace.

Every check is seeded, so a correct build passes deterministically.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import oracle
from ..engine import Draws, Metrics, Simulation, WorldConfig, run
from .._kernel import run_draws
from ..scenario import builtin_path, format_trace, load_scenario, replay_scenario


@dataclass
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


def _static(spec: oracle.ChainSpec, **kw) -> WorldConfig:
    return WorldConfig(energy_probability=spec.energy_probability,
                       harvest_amount=spec.harvest_amount,
                       transmit_cost=spec.transmit_cost, capacity=spec.capacity,
                       request_probability=spec.request_probability, birth_rate=0.0,
                       death_rate=0.0, initial_contents=1, **kw)


def check_golden() -> Check:
    script = load_scenario(builtin_path("fig2"))
    got = format_trace(replay_scenario(script), script.catalog)
    want = builtin_path("fig2", ".trace").read_text()
    return Check("fig2 replay", got == want,
                 "trace matches golden file" if got == want else "trace differs")


def check_stationary(periods: int = 200_000) -> list[Check]:
    specs = [oracle.ChainSpec(10, 0.5, 3, 2, 0.75), oracle.ChainSpec(6, 0.3, 2, 2, 0.5),
             oracle.ChainSpec(4, 0.8, 1, 3, 0.9)]
    checks = []
    for i, spec in enumerate(specs):
        exact = oracle.exact_eta_baseline(spec)
        m = run(_static(spec, horizon=periods + periods // 10, warmup=periods // 10, seed=i))
        se = oracle.eta_standard_error(spec, periods)
        z = (m.eta - exact) / se
        checks.append(Check(f"stationary chain {i}", abs(z) <= 3,
                            f"simulated {m.eta:.5f}, exact {exact:.5f}, z={z:+.2f}"))
    return checks


def check_exhaustive(replications: int = 4000) -> list[Check]:
    configs = [
        WorldConfig(energy_probability=0.5, harvest_amount=2, transmit_cost=2, capacity=4,
                    request_probability=0.8, birth_rate=0, death_rate=0, initial_contents=3,
                    policy="push_only", horizon=6, warmup=1),
        WorldConfig(energy_probability=0.6, harvest_amount=3, transmit_cost=2, capacity=6,
                    request_probability=0.7, birth_rate=0, death_rate=0, initial_contents=3,
                    policy="threshold", cache_mode="fetch", horizon=6, warmup=0),
    ]
    checks = []
    for i, config in enumerate(configs):
        exact = oracle.exhaustive_eta(config).expected
        runs = np.array([run_draws(c, Draws.generate(c)) for c in
                         (config.replace(seed=r) for r in range(replications))], dtype=float)
        worst = 0.0
        for j, name in enumerate(oracle.COUNTERS):
            se = runs[:, j].std(ddof=1) / math.sqrt(replications)
            if se > 0:
                worst = max(worst, abs(runs[:, j].mean() - exact[name]) / se)
            elif runs[0, j] != exact[name]:
                worst = math.inf
        checks.append(Check(f"exhaustive {config.policy}", worst <= 3,
                            f"largest counter deviation {worst:.2f} standard errors"))
    return checks


def check_paths() -> Check:
    configs = [WorldConfig(birth_rate=0.5, death_rate=0.02, horizon=3000, seed=s,
                           policy=policy, cache_mode=mode)
               for s, (policy, mode) in enumerate([("baseline", "full"), ("push_only", "full"),
                                                   ("threshold", "fetch"), ("baseline", "fetch")])]
    bad = [c.policy for c in configs if run(c) != Simulation(c).run()]
    return Check("compiled vs reference loop", not bad,
                 "identical counters" if not bad else f"mismatch for {bad}")


def selftest() -> list[Check]:
    return [check_golden(), check_paths(), *check_stationary(), *check_exhaustive()]
