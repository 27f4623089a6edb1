"""JSON configuration files.

A config file is one JSON object of scalars (plus the list of sweep values
and policies). Keys are either :class:`~ehcell.engine.WorldConfig` field
names or the short symbols used throughout the literature on this model,
e.g. ``"p_r": 0.75`` for ``request_probability``. Keys starting with an
underscore are comments and ignored.
"""
from __future__ import annotations

import dataclasses
import json
from pathlib import Path

from ..engine import WorldConfig
from ..errors import ConfigError

ALIASES = {
    "p": "energy_probability",
    "E_H": "harvest_amount",
    "E_F": "fetch_cost",
    "E_P": "transmit_cost",
    "E_max": "capacity",
    "E_0": "initial_level",
    "lambda_c": "birth_rate",
    "λ_c": "birth_rate",
    "mu_c": "death_rate",
    "μ_c": "death_rate",
    "v": "zipf_exponent",
    "p_r": "request_probability",
    "M_f": "fetch_threshold",
    "M_p": "push_threshold",
    "K": "max_fetch",
}

WORLD_FIELDS = {f.name for f in dataclasses.fields(WorldConfig)}
SWEEP_KEYS = {"axis", "values", "policies", "replications", "seed_base", "name"}


def canonical(key: str) -> str:
    """Field name for a config key or alias; ConfigError if unknown."""
    name = ALIASES.get(key, key)
    if name not in WORLD_FIELDS:
        raise ConfigError(f"unknown configuration key {key!r}")
    return name


def load_config(path) -> dict:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    return raw


def world_config(mapping: dict, **overrides) -> WorldConfig:
    """Build and validate a WorldConfig, ignoring sweep-only keys."""
    fields = {}
    for key, value in {**mapping, **overrides}.items():
        if key in SWEEP_KEYS or key.startswith("_"):
            continue
        name = canonical(key)
        if name in fields and fields[name] != value:
            raise ConfigError(f"{name} given twice with different values")
        fields[name] = value
    try:
        config = WorldConfig(**fields)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return config.validate()


def resolved(config: WorldConfig) -> dict:
    """Every field of `config` with defaults filled in, for config echoes."""
    out = dataclasses.asdict(config)
    out["fetch_threshold"] = config.threshold_params.fetch_threshold
    out["push_threshold"] = config.threshold_params.push_threshold
    out["warmup"] = config.warmup_periods
    out["initial_contents"] = config.initial_size
    return out


def sweep_spec(mapping: dict, replications=None, seed_base=None):
    from .sweep import SweepSpec

    missing = [k for k in ("axis", "values") if k not in mapping]
    if missing:
        raise ConfigError(f"sweep config lacks {', '.join(missing)}")
    base = world_config(mapping)
    return SweepSpec(
        base=base,
        axis=mapping["axis"],
        values=list(mapping["values"]),
        policies=list(mapping.get("policies", [base.policy])),
        replications=int(replications if replications is not None
                         else mapping.get("replications", 20)),
        seed_base=int(seed_base if seed_base is not None
                      else mapping.get("seed_base", base.seed)),
        name=mapping.get("name", ""),
    ).validate()
