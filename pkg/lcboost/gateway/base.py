#!/usr/bin/env python3
"""
Base types for LLM backends and the gateway every engine call goes through.

A backend turns one CompletionRequest into one CompletionResponse. The
gateway wraps a backend with the window check and the cost ledger.

Usage:
    gateway = LLMGateway(script_mock([('', '{prompt}')]), profile)
    response = gateway.complete(CompletionRequest(prompt='hi', max_output_tokens=8))
    response.text  # 'hi'
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass
from decimal import Decimal
from typing import Any, Dict, Optional, Tuple

from lcboost.constants import (
    DEFAULT_COST_PER_1M_INPUT,
    DEFAULT_COST_PER_1M_OUTPUT,
    DEFAULT_MAX_OUTPUT_TOKENS,
    DEFAULT_TEMPERATURE,
    DEFAULT_WINDOW,
)
from lcboost.text_segmentation import count_tokens
from lcboost.utils import sha256_text

logger = logging.getLogger(__name__)


class GatewayError(Exception):
    """Base class for gateway and backend failures."""


class OverLength(GatewayError):
    """A request would not fit the backend's context window."""


class TransportError(GatewayError):
    """Remote backend failed after bounded retries."""


class BackendUnavailable(TransportError):
    """Remote backend cannot be used at all (e.g. no API key)."""


class CacheMiss(GatewayError):
    """Replay store holds no response for a request."""


class InvalidRuleSet(GatewayError):
    """Mock rules are empty or do not end with a catch-all."""


class StoreCorrupt(GatewayError):
    """A replay store line fails to parse or its hash does not match."""


@dataclass(frozen=True)
class BackendProfile:
    """Window and pricing of one backend."""
    name: str
    context_limit: int = DEFAULT_WINDOW
    max_output_tokens: int = DEFAULT_MAX_OUTPUT_TOKENS
    cost_per_1M_input: Decimal = Decimal(DEFAULT_COST_PER_1M_INPUT)
    cost_per_1M_output: Decimal = Decimal(DEFAULT_COST_PER_1M_OUTPUT)

    def __post_init__(self):
        if self.context_limit < 1 or self.max_output_tokens < 1:
            raise ValueError("context_limit and max_output_tokens must be positive")
        if self.context_limit < self.max_output_tokens:
            raise ValueError(
                f"context_limit ({self.context_limit}) < max_output_tokens ({self.max_output_tokens})")
        for price in (self.cost_per_1M_input, self.cost_per_1M_output):
            if Decimal(price) < 0:
                raise ValueError("prices must be non-negative")


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    max_output_tokens: int = DEFAULT_MAX_OUTPUT_TOKENS
    temperature: float = DEFAULT_TEMPERATURE
    stop_sequences: Tuple[str, ...] = ()

    def to_dict(self) -> Dict[str, Any]:
        return {
            'prompt': self.prompt,
            'max_output_tokens': self.max_output_tokens,
            'temperature': self.temperature,
            'stop_sequences': list(self.stop_sequences),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'CompletionRequest':
        return cls(
            prompt=data['prompt'],
            max_output_tokens=int(data['max_output_tokens']),
            temperature=float(data['temperature']),
            stop_sequences=tuple(data.get('stop_sequences') or ()),
        )


@dataclass(frozen=True)
class CompletionResponse:
    text: str
    prompt_tokens: int
    response_tokens: int
    backend: str
    cache_hit: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'CompletionResponse':
        return cls(
            text=data['text'],
            prompt_tokens=int(data['prompt_tokens']),
            response_tokens=int(data['response_tokens']),
            backend=data['backend'],
            cache_hit=bool(data.get('cache_hit', False)),
        )


def apply_stop_sequences(text: str, stop_sequences: Tuple[str, ...]) -> str:
    """Cut text at the earliest stop sequence, if any occurs."""
    cut = len(text)
    for stop in stop_sequences:
        if stop:
            pos = text.find(stop)
            if pos != -1:
                cut = min(cut, pos)
    return text[:cut]


class Backend(ABC):
    """Base class for completion backends."""

    name: str = 'backend'

    @abstractmethod
    def generate(self, request: CompletionRequest) -> CompletionResponse:
        """
        Produce one completion.

        Implementations must be safe to call from several threads.
        """
        pass


@dataclass
class LLMGateway:
    """
    Single entry point for completions.

    Enforces count_tokens(prompt) + max_output_tokens <= context_limit and
    records one ledger entry per completed call.
    """
    backend: Backend
    profile: BackendProfile
    ledger: Optional['CostLedger'] = None  # noqa: F821

    def __post_init__(self):
        if self.ledger is None:
            from lcboost.gateway.ledger import CostLedger
            self.ledger = CostLedger()

    def fits(self, prompt: str, max_output_tokens: Optional[int] = None) -> bool:
        """Whether a prompt plus its output allowance fits the window."""
        allowance = self.profile.max_output_tokens if max_output_tokens is None else max_output_tokens
        return count_tokens(prompt) + allowance <= self.profile.context_limit

    def request(self, prompt: str, **kwargs) -> CompletionRequest:
        """Build a request with the profile's output allowance."""
        kwargs.setdefault('max_output_tokens', self.profile.max_output_tokens)
        return CompletionRequest(prompt=prompt, **kwargs)

    def complete(self, request: CompletionRequest, role: str = '') -> CompletionResponse:
        """
        Send one request to the backend.

        Args:
            request: The completion request
            role: Tag stored in the ledger (e.g. 'task_understanding', 'append')

        Raises:
            OverLength: if the request does not fit the window; never truncated
            TransportError / CacheMiss: propagated from the backend
        """
        prompt_tokens = count_tokens(request.prompt)
        if request.max_output_tokens < 1:
            raise OverLength(f"max_output_tokens must be positive, got {request.max_output_tokens}")
        if prompt_tokens + request.max_output_tokens > self.profile.context_limit:
            raise OverLength(
                f"{role or 'request'}: {prompt_tokens} prompt + {request.max_output_tokens} output tokens "
                f"exceeds context limit {self.profile.context_limit}")

        response = self.backend.generate(request)
        entry = self.ledger.record(role, response.prompt_tokens, response.response_tokens)
        logger.debug(f"call {entry.call_id} [{role}] prompt={sha256_text(request.prompt)[:12]} "
                     f"tokens={response.prompt_tokens}+{response.response_tokens} "
                     f"cache_hit={response.cache_hit}")
        return response
