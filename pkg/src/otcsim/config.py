"""Simulation configuration: defaults, validation, and the flat config file.

Config files are flat `key = value` text (one pair per line, `#` comments)
with keys matching SimConfig field names. Resolution order is environment
variables (prefix OTCSIM_), then file values, then explicit overrides such
as CLI flags.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path


class ConfigError(ValueError):
    """A configuration value failed validation; message names the field."""


ENV_PREFIX = "OTCSIM_"


@dataclass
class SimConfig:
    # Agent population
    n_value_investors: int = 10
    n_trend_investors: int = 5
    n_dealers: int = 10
    # Market mechanics
    bid_offer: float = 1.0
    dealer_position_limit: float = 20.0
    prob_of_link: float = 0.50
    trade_size_cap: float = 3.0
    market_disparity: float = 20.0
    enable_broker_market: bool = True
    skew_coefficient: float = 0.001
    vi_sigma: float = 5.0
    target_mixture_sigma: float = 5.0
    initial_price: float = 100.0
    rng_seed: int = 0
    # Q-learning
    discount: float = 0.99
    batch_size: int = 32
    replay_capacity: int = 10_000
    learning_rate: float = 1e-3
    tau: float = 1e-3
    epsilon_decay: float = 0.995
    epsilon_floor: float = 0.05
    reward_scale: float = 100.0

    def validate(self) -> "SimConfig":
        if self.n_dealers < 1:
            raise ConfigError("n_dealers: at least one dealer is required")
        if self.n_value_investors < 0:
            raise ConfigError("n_value_investors: must be >= 0")
        if self.n_trend_investors < 0:
            raise ConfigError("n_trend_investors: must be >= 0")
        if not 0.0 <= self.prob_of_link <= 1.0:
            raise ConfigError("prob_of_link: must lie in [0, 1]")
        if self.trade_size_cap <= 0:
            raise ConfigError("trade_size_cap: must be > 0")
        if self.bid_offer < 0:
            raise ConfigError("bid_offer: must be >= 0")
        if self.vi_sigma <= 0:
            raise ConfigError("vi_sigma: must be > 0")
        if self.target_mixture_sigma < 0:
            raise ConfigError("target_mixture_sigma: must be >= 0")
        if self.dealer_position_limit < 0:
            raise ConfigError("dealer_position_limit: must be >= 0")
        if not 0.0 < self.epsilon_decay <= 1.0:
            raise ConfigError("epsilon_decay: must lie in (0, 1]")
        if not 0.0 <= self.epsilon_floor <= 1.0:
            raise ConfigError("epsilon_floor: must lie in [0, 1]")
        if self.batch_size < 1:
            raise ConfigError("batch_size: must be >= 1")
        if self.replay_capacity < self.batch_size:
            raise ConfigError("replay_capacity: must be >= batch_size")
        if self.reward_scale <= 0:
            raise ConfigError("reward_scale: must be > 0")
        if self.rng_seed < 0:
            raise ConfigError("rng_seed: must be >= 0")
        return self

    def replace(self, **kwargs) -> "SimConfig":
        return dataclasses.replace(self, **kwargs).validate()

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def fingerprint(self) -> str:
        """Stable hash of the fully resolved config, seed included."""
        blob = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(SimConfig)}


def _coerce(field: str, raw: str):
    if field not in _FIELD_TYPES:
        raise ConfigError(f"{field}: unknown configuration key")
    kind = _FIELD_TYPES[field]
    raw = raw.strip()
    try:
        if kind == "bool":
            if raw.lower() in ("1", "true", "on", "yes"):
                return True
            if raw.lower() in ("0", "false", "off", "no"):
                return False
            raise ValueError(raw)
        if kind == "int":
            return int(raw)
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"{field}: cannot parse {raw!r} as {kind}") from exc


def parse_config_text(text: str) -> dict:
    """Parse flat `key = value` lines into typed overrides."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = line.split("=", 1)
        values[key.strip()] = _coerce(key.strip(), raw)
    return values


def load_config(
    path: str | Path | None = None,
    overrides: dict | None = None,
    env: dict | None = None,
) -> SimConfig:
    """Resolve a SimConfig from environment, optional file, and overrides."""
    env = os.environ if env is None else env
    values: dict = {}
    for field in _FIELD_TYPES:
        env_key = ENV_PREFIX + field.upper()
        if env_key in env:
            values[field] = _coerce(field, env[env_key])
    if path is not None:
        values.update(parse_config_text(Path(path).read_text()))
    if overrides:
        for key, val in overrides.items():
            if key not in _FIELD_TYPES:
                raise ConfigError(f"{key}: unknown configuration key")
            values[key] = val
    return SimConfig(**values).validate()


def dump_config_text(config: SimConfig) -> str:
    """Write a config back out in the flat key = value form."""
    lines = []
    for field, value in config.to_dict().items():
        lines.append(f"{field} = {value}")
    return "\n".join(lines) + "\n"
