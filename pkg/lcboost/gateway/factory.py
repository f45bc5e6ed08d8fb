#!/usr/bin/env python3
"""
Build backends and gateways from a RunConfig.

Usage:
    gateway = create_gateway(config, store_path=Path('runs/replay/rec-1.jsonl'))
"""

import logging
from decimal import Decimal
from pathlib import Path
from typing import Optional

from lcboost.config import RunConfig
from lcboost.gateway.base import Backend, BackendProfile, LLMGateway
from lcboost.gateway.ledger import CostLedger
from lcboost.gateway.mock import load_mock_rules, script_mock
from lcboost.gateway.replay import ReplayBackend

logger = logging.getLogger(__name__)

# Used when backend.mock_rules is unset: every call declines
NULL_RULES = [('', 'null')]


def create_profile(config: RunConfig, name: str) -> BackendProfile:
    return BackendProfile(
        name=name,
        context_limit=config.window,
        max_output_tokens=config.max_output_tokens,
        cost_per_1M_input=Decimal(str(config.remote.cost_per_1M_input)),
        cost_per_1M_output=Decimal(str(config.remote.cost_per_1M_output)),
    )


def _create_mock(config: RunConfig) -> Backend:
    if config.mock_rules:
        return load_mock_rules(Path(config.mock_rules))
    return script_mock(NULL_RULES)


def _create_remote(config: RunConfig) -> Backend:
    # Imported lazily so mock and replay runs never touch requests
    from lcboost.gateway.remote import RemoteBackend

    remote = config.remote
    return RemoteBackend(model=remote.model, base_url=remote.base_url,
                         api_key_env=remote.api_key_env, timeout=remote.timeout,
                         max_attempts=remote.max_attempts, backoff=remote.backoff)


def create_backend(config: RunConfig, store_path: Optional[Path] = None,
                   inner: Optional[Backend] = None) -> Backend:
    """
    Factory for the configured backend kind.

    Args:
        config: Run configuration ('mock', 'remote' or 'replay')
        store_path: Replay store file; required for 'replay'
        inner: Backend to use instead of building one from config (for
            'replay' this is the backend recorded from)

    Returns:
        Backend instance

    Raises:
        ValueError: for an unknown kind or a replay run without a store
        BackendUnavailable: if the remote API key is missing
    """
    kind = config.backend
    if kind == 'mock':
        return inner or _create_mock(config)
    if kind == 'remote':
        return inner or _create_remote(config)
    if kind == 'replay':
        if store_path is None:
            raise ValueError("replay backend needs a store path")
        replay = config.replay
        if replay.mode == 'record' and inner is None:
            inner = _create_mock(config) if replay.record_from == 'mock' else _create_remote(config)
        return ReplayBackend(store_path, inner=inner, mode=replay.mode,
                             backend_name=replay.backend_name)
    raise ValueError(f"Unknown backend: {kind}. Choose from: mock, remote, replay")


def create_gateway(config: RunConfig, store_path: Optional[Path] = None,
                   inner: Optional[Backend] = None) -> LLMGateway:
    """Backend plus profile plus a fresh ledger."""
    backend = create_backend(config, store_path=store_path, inner=inner)
    logger.debug(f"Gateway over {backend.name} (window {config.window})")
    return LLMGateway(backend=backend, profile=create_profile(config, backend.name),
                      ledger=CostLedger())
