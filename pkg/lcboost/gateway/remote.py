#!/usr/bin/env python3
"""
OpenAI-compatible chat-completion backend.

Each call sends a single user message. Connection errors, timeouts, 429 and
5xx responses are retried with exponential backoff; other HTTP errors fail
immediately. The API key is read from an environment variable only.
"""

import logging
import os
import time
from typing import Any, Callable, Dict, Optional

import requests

from lcboost.constants import (
    DEFAULT_API_KEY_ENV,
    DEFAULT_BASE_URL,
    DEFAULT_REMOTE_MODEL,
    REMOTE_TIMEOUT_SECONDS,
    TRANSPORT_BACKOFF_SECONDS,
    TRANSPORT_MAX_ATTEMPTS,
)
from lcboost.gateway.base import (
    Backend,
    BackendUnavailable,
    CompletionRequest,
    CompletionResponse,
    TransportError,
)
from lcboost.text_segmentation import count_tokens

logger = logging.getLogger(__name__)

RETRYABLE_STATUS = {429, 500, 502, 503, 504}


class RemoteBackend(Backend):
    """Chat completions over HTTPS."""

    def __init__(self, model: str = DEFAULT_REMOTE_MODEL, base_url: str = DEFAULT_BASE_URL,
                 api_key_env: str = DEFAULT_API_KEY_ENV, timeout: float = REMOTE_TIMEOUT_SECONDS,
                 max_attempts: int = TRANSPORT_MAX_ATTEMPTS,
                 backoff: float = TRANSPORT_BACKOFF_SECONDS,
                 session: Optional[requests.Session] = None,
                 sleep: Callable[[float], None] = time.sleep):
        api_key = os.environ.get(api_key_env)
        if not api_key:
            raise BackendUnavailable(f"environment variable {api_key_env} is not set")

        self.name = f"remote:{model}"
        self.model = model
        self.url = f"{base_url.rstrip('/')}/chat/completions"
        self.timeout = timeout
        self.max_attempts = max(1, max_attempts)
        self.backoff = backoff
        self._sleep = sleep

        self.session = session or requests.Session()
        self.session.headers.update({
            'Authorization': f'Bearer {api_key}',
            'Content-Type': 'application/json',
            'User-Agent': 'lcboost/1.0',
        })

    def _payload(self, request: CompletionRequest) -> Dict[str, Any]:
        payload = {
            'model': self.model,
            'messages': [{'role': 'user', 'content': request.prompt}],
            'max_tokens': request.max_output_tokens,
            'temperature': request.temperature,
        }
        if request.stop_sequences:
            payload['stop'] = list(request.stop_sequences)
        return payload

    def _post(self, payload: Dict[str, Any]) -> Dict[str, Any]:
        last_error = None
        for attempt in range(1, self.max_attempts + 1):
            try:
                response = self.session.post(self.url, json=payload, timeout=self.timeout)
                if response.status_code in RETRYABLE_STATUS:
                    last_error = f"HTTP {response.status_code}"
                else:
                    response.raise_for_status()
                    return response.json()
            except requests.HTTPError as e:
                raise TransportError(f"{self.url}: {e}") from e
            except (requests.ConnectionError, requests.Timeout) as e:
                last_error = str(e)
            except ValueError as e:
                raise TransportError(f"{self.url}: invalid JSON body: {e}") from e

            if attempt < self.max_attempts:
                delay = self.backoff * (2 ** (attempt - 1))
                logger.warning(f"Attempt {attempt}/{self.max_attempts} failed ({last_error}); "
                               f"retrying in {delay:.1f}s")
                self._sleep(delay)

        raise TransportError(f"{self.url}: failed after {self.max_attempts} attempts: {last_error}")

    def generate(self, request: CompletionRequest) -> CompletionResponse:
        data = self._post(self._payload(request))
        try:
            text = data['choices'][0]['message']['content'] or ''
        except (KeyError, IndexError, TypeError) as e:
            raise TransportError(f"unexpected response shape: {e}") from e

        # Provider usage when reported, else the local approximation
        usage = data.get('usage') or {}
        return CompletionResponse(
            text=text,
            prompt_tokens=int(usage.get('prompt_tokens') or count_tokens(request.prompt)),
            response_tokens=int(usage.get('completion_tokens') or count_tokens(text)),
            backend=self.name,
        )
