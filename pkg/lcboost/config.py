#!/usr/bin/env python3
"""
Run configuration.

Maps config.yaml onto typed dataclasses, applies command-line overrides and
validates the window split. Unknown keys are rejected so a typo never
silently falls back to a default.

Usage:
    config = load_config('config.yaml', {'chunk_budget': 1024, 'backend': 'replay'})
    config.validate()
"""

import dataclasses
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

from lcboost import constants as C
from lcboost.utils import load_yaml

BACKEND_KINDS = ('mock', 'remote', 'replay')
BASELINE_NAMES = ('retrieve_only', 'merge_only', 'append_only', 'merge_move', 'append_move',
                  'retrieve_move', 'brute_force', 'random')
STRATEGIES = (C.STRATEGY_LCBOOST,) + BASELINE_NAMES


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


@dataclass(frozen=True)
class RemoteConfig:
    model: str = C.DEFAULT_REMOTE_MODEL
    base_url: str = C.DEFAULT_BASE_URL
    api_key_env: str = C.DEFAULT_API_KEY_ENV
    timeout: float = C.REMOTE_TIMEOUT_SECONDS
    max_attempts: int = C.TRANSPORT_MAX_ATTEMPTS
    backoff: float = C.TRANSPORT_BACKOFF_SECONDS
    cost_per_1M_input: str = C.DEFAULT_COST_PER_1M_INPUT
    cost_per_1M_output: str = C.DEFAULT_COST_PER_1M_OUTPUT


@dataclass(frozen=True)
class ReplayConfig:
    mode: str = 'replay'
    store_dir: str = 'runs/replay'
    backend_name: str = f"remote:{C.DEFAULT_REMOTE_MODEL}"
    record_from: str = 'remote'


@dataclass(frozen=True)
class EnergyConfig:
    params: float = C.MODEL_PARAMS_7B
    hidden: int = C.MODEL_HIDDEN_7B
    layers: int = C.MODEL_LAYERS_7B
    peak_flops: float = C.HW_PEAK_FLOPS
    power_watts: float = C.HW_POWER_WATTS
    formula: str = 'dense'
    per_chunk_overhead: int = 0
    sweep_min: int = C.SWEEP_MIN_TOKENS
    sweep_max: int = C.SWEEP_MAX_TOKENS
    sweep_points: int = 6


@dataclass(frozen=True)
class LoggingConfig:
    console_level: str = 'INFO'
    file_level: str = 'DEBUG'
    log_file: bool = False
    log_dir: str = 'runs/logs'


@dataclass(frozen=True)
class RunConfig:
    """Everything one run or suite needs. Immutable; use with_overrides()."""
    # engine
    strategy: str = C.STRATEGY_LCBOOST
    window: int = C.DEFAULT_WINDOW
    chunk_budget: int = C.DEFAULT_CHUNK_BUDGET
    evidence_budget: int = C.DEFAULT_EVIDENCE_BUDGET
    prompt_reserve: int = C.DEFAULT_PROMPT_RESERVE
    max_output_tokens: int = C.DEFAULT_MAX_OUTPUT_TOKENS
    query_budget: int = C.DEFAULT_QUERY_BUDGET
    temperature: float = C.DEFAULT_TEMPERATURE
    # backend
    backend: str = 'mock'
    mock_rules: Optional[str] = None
    token_calibration: float = C.DEFAULT_TOKEN_CALIBRATION
    remote: RemoteConfig = field(default_factory=RemoteConfig)
    replay: ReplayConfig = field(default_factory=ReplayConfig)
    # retriever
    scorer: str = 'bm25'
    top_k: int = C.DEFAULT_TOP_K
    # harness
    concurrency: int = 1
    strict: bool = True
    datasets: Optional[str] = None
    output_dir: str = 'runs'
    # misc
    energy: EnergyConfig = field(default_factory=EnergyConfig)
    logging: LoggingConfig = field(default_factory=LoggingConfig)
    seed: int = 42

    def validate(self) -> 'RunConfig':
        """
        Check budgets and choices.

        Raises:
            ConfigError: on the first violated rule
        """
        positive = ('window', 'chunk_budget', 'evidence_budget', 'prompt_reserve',
                    'max_output_tokens', 'query_budget', 'top_k', 'concurrency')
        for name in positive:
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.chunk_budget + self.evidence_budget + self.prompt_reserve > self.window:
            raise ConfigError(
                f"chunk_budget ({self.chunk_budget}) + evidence_budget ({self.evidence_budget}) + "
                f"prompt_reserve ({self.prompt_reserve}) exceeds window ({self.window})")
        if self.max_output_tokens + self.query_budget >= self.prompt_reserve:
            raise ConfigError(
                f"max_output_tokens ({self.max_output_tokens}) + query_budget ({self.query_budget}) "
                f"must be below prompt_reserve ({self.prompt_reserve})")
        if self.query_budget < 2:
            raise ConfigError("query_budget must be at least 2")
        if self.temperature < 0:
            raise ConfigError("temperature must be non-negative")
        if self.token_calibration <= 0:
            raise ConfigError("token_calibration must be positive")
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if self.backend not in BACKEND_KINDS:
            raise ConfigError(f"backend must be one of {BACKEND_KINDS}, got {self.backend!r}")
        if self.replay.mode not in ('record', 'replay'):
            raise ConfigError(f"replay.mode must be record or replay, got {self.replay.mode!r}")
        if self.replay.record_from not in ('mock', 'remote'):
            raise ConfigError(f"replay.record_from must be mock or remote, got {self.replay.record_from!r}")
        for price in (self.remote.cost_per_1M_input, self.remote.cost_per_1M_output):
            try:
                if Decimal(str(price)) < 0:
                    raise ConfigError(f"prices must be non-negative, got {price}")
            except InvalidOperation:
                raise ConfigError(f"invalid price {price!r}")
        return self

    def with_overrides(self, **overrides: Any) -> 'RunConfig':
        """Copy with top-level fields replaced; None values are ignored."""
        values = {k: v for k, v in overrides.items() if v is not None}
        unknown = set(values) - {f.name for f in dataclasses.fields(self)}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return dataclasses.replace(self, **values)

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)


# YAML section -> {yaml key: RunConfig field}
SECTION_KEYS = {
    'engine': {
        'strategy': 'strategy', 'window': 'window', 'chunk_budget': 'chunk_budget',
        'evidence_budget': 'evidence_budget', 'prompt_reserve': 'prompt_reserve',
        'max_output_tokens': 'max_output_tokens', 'query_budget': 'query_budget',
        'temperature': 'temperature',
    },
    'backend': {
        'kind': 'backend', 'mock_rules': 'mock_rules', 'token_calibration': 'token_calibration',
    },
    'retriever': {'scorer': 'scorer', 'top_k': 'top_k'},
    'harness': {
        'concurrency': 'concurrency', 'strict': 'strict', 'datasets': 'datasets',
        'output_dir': 'output_dir',
    },
}
NESTED_SECTIONS = {
    ('backend', 'remote'): ('remote', RemoteConfig),
    ('backend', 'replay'): ('replay', ReplayConfig),
    ('energy',): ('energy', EnergyConfig),
    ('logging',): ('logging', LoggingConfig),
}


def _build_nested(cls: type, data: Mapping[str, Any], where: str):
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    values = {}
    for f in dataclasses.fields(cls):
        if f.name in data:
            default = getattr(cls(), f.name)
            value = data[f.name]
            # YAML reads 312e12 as a string; coerce to the default's type
            if isinstance(default, (int, float)) and not isinstance(default, bool) and value is not None:
                try:
                    value = type(default)(float(value)) if isinstance(default, float) else int(float(value))
                except (TypeError, ValueError):
                    raise ConfigError(f"{where}.{f.name}: expected a number, got {value!r}")
            values[f.name] = value
    return cls(**values)


def config_from_dict(data: Mapping[str, Any]) -> RunConfig:
    """
    Build a RunConfig from the parsed YAML mapping.

    Raises:
        ConfigError: on unknown sections or keys
    """
    data = dict(data or {})
    values: Dict[str, Any] = {}

    allowed_sections = set(SECTION_KEYS) | {'energy', 'logging', 'seed'}
    unknown = set(data) - allowed_sections
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")

    if 'seed' in data:
        values['seed'] = int(data['seed'])

    for section, mapping in SECTION_KEYS.items():
        body = dict(data.get(section) or {})
        nested = {path[1] for path in NESTED_SECTIONS if len(path) == 2 and path[0] == section}
        unknown = set(body) - set(mapping) - nested
        if unknown:
            raise ConfigError(f"unknown keys in {section}: {sorted(unknown)}")
        for key, field_name in mapping.items():
            if key in body:
                values[field_name] = body[key]

    for path, (field_name, cls) in NESTED_SECTIONS.items():
        node: Any = data
        for part in path:
            node = (node or {}).get(part) if isinstance(node, Mapping) else None
        if node:
            values[field_name] = _build_nested(cls, node, '.'.join(path))

    try:
        return RunConfig(**values)
    except TypeError as e:
        raise ConfigError(str(e)) from e


def load_config(path: Optional[Path] = None, overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """
    Load config.yaml (or defaults when path is None), apply overrides, validate.

    Raises:
        ConfigError: if the file is missing, malformed or inconsistent
    """
    data: Dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            data = load_yaml(path)
        except Exception as e:
            raise ConfigError(f"cannot read {path}: {e}") from e
    config = config_from_dict(data)
    if overrides:
        config = config.with_overrides(**overrides)
    return config.validate()
