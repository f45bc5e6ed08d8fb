"""LLM gateway: backends, window check and cost ledger."""

from lcboost.gateway.base import (
    Backend,
    BackendProfile,
    BackendUnavailable,
    CacheMiss,
    CompletionRequest,
    CompletionResponse,
    GatewayError,
    InvalidRuleSet,
    LLMGateway,
    OverLength,
    StoreCorrupt,
    TransportError,
)
from lcboost.gateway.factory import create_backend, create_gateway, create_profile
from lcboost.gateway.ledger import CostLedger, LedgerEntry
from lcboost.gateway.mock import ECHO, MockBackend, Rule, load_mock_rules, script_mock
from lcboost.gateway.replay import MODE_RECORD, MODE_REPLAY, ReplayBackend, request_hash

__all__ = [
    'Backend',
    'BackendProfile',
    'BackendUnavailable',
    'CacheMiss',
    'CompletionRequest',
    'CompletionResponse',
    'CostLedger',
    'ECHO',
    'GatewayError',
    'InvalidRuleSet',
    'LLMGateway',
    'LedgerEntry',
    'MODE_RECORD',
    'MODE_REPLAY',
    'MockBackend',
    'OverLength',
    'ReplayBackend',
    'Rule',
    'StoreCorrupt',
    'TransportError',
    'create_backend',
    'create_gateway',
    'create_profile',
    'load_mock_rules',
    'request_hash',
    'script_mock',
]
