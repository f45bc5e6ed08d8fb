#!/usr/bin/env python3
"""
Record/replay wrapper around any backend.

The store is a newline-delimited JSON file of {hash, request, response}
records, appended to and never rewritten during a run. The hash covers the
prompt, max_output_tokens, temperature, stop_sequences and the backend name.

Modes:
    record  - serve stored responses, call the wrapped backend on a miss and
              append the new record
    replay  - serve stored responses only; a miss raises CacheMiss

Usage:
    backend = ReplayBackend('runs/r1.jsonl', inner=remote, mode='record')
    ...
    backend = ReplayBackend('runs/r1.jsonl', backend_name=remote.name, mode='replay')
"""

import json
import logging
import os
import threading
from collections import Counter
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from lcboost.gateway.base import (
    Backend,
    CacheMiss,
    CompletionRequest,
    CompletionResponse,
    StoreCorrupt,
)
from lcboost.utils import canonical_json, sha256_text

logger = logging.getLogger(__name__)

MODE_RECORD = 'record'
MODE_REPLAY = 'replay'
REPLAY_MODES = (MODE_RECORD, MODE_REPLAY)


def request_hash(request: CompletionRequest, backend_name: str) -> str:
    """Stable key for one request against one backend."""
    key = request.to_dict()
    key['backend'] = backend_name
    return sha256_text(canonical_json(key))


def _parse_line(line: str, line_no: int, path: Path) -> Tuple[str, Dict[str, Any]]:
    try:
        record = json.loads(line)
        stored_hash = record['hash']
        request = CompletionRequest.from_dict(record['request'])
        response = CompletionResponse.from_dict(record['response'])
    except (ValueError, KeyError, TypeError) as e:
        raise StoreCorrupt(f"{path}:{line_no}: unreadable record: {e}") from e
    expected = request_hash(request, response.backend)
    if stored_hash != expected:
        raise StoreCorrupt(f"{path}:{line_no}: hash mismatch (stored {stored_hash[:12]}, "
                           f"computed {expected[:12]})")
    return stored_hash, record


def load_store(path: Path) -> Dict[str, Dict[str, Any]]:
    """
    Read and verify a store. The first record for a hash wins.

    Raises:
        StoreCorrupt: on the first unreadable or tampered line
    """
    path = Path(path)
    records: Dict[str, Dict[str, Any]] = {}
    if not path.exists():
        return records
    with open(path, 'r', encoding='utf-8') as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            key, record = _parse_line(line, line_no, path)
            records.setdefault(key, record)
    return records


class ReplayBackend(Backend):
    """Serves completions from an append-only store."""

    def __init__(self, store_path: Path, inner: Optional[Backend] = None,
                 mode: str = MODE_REPLAY, backend_name: Optional[str] = None):
        if mode not in REPLAY_MODES:
            raise ValueError(f"mode must be one of {REPLAY_MODES}, got {mode!r}")
        if mode == MODE_RECORD and inner is None:
            raise ValueError("record mode needs a backend to record from")
        if inner is None and not backend_name:
            raise ValueError("replay without a wrapped backend needs backend_name")

        self.store_path = Path(store_path)
        self.inner = inner
        self.mode = mode
        self.name = inner.name if inner is not None else backend_name
        self._lock = threading.Lock()
        self._records = load_store(self.store_path)
        logger.debug(f"Replay store {self.store_path}: {len(self._records)} records ({mode})")

    def __len__(self) -> int:
        return len(self._records)

    def generate(self, request: CompletionRequest) -> CompletionResponse:
        key = request_hash(request, self.name)
        with self._lock:
            record = self._records.get(key)
        if record is not None:
            return CompletionResponse.from_dict(dict(record['response'], cache_hit=True))
        if self.mode == MODE_REPLAY:
            raise CacheMiss(f"no stored response for request {key[:12]} in {self.store_path}")

        # Record mode: the wrapped call runs unlocked; the first response
        # stored for a hash wins if two callers race on it
        response = self.inner.generate(request)
        stored = dict(response.to_dict(), cache_hit=False)
        record = {'hash': key, 'request': request.to_dict(), 'response': stored}
        with self._lock:
            if key in self._records:
                return CompletionResponse.from_dict(dict(self._records[key]['response'], cache_hit=True))
            self.store_path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.store_path, 'a', encoding='utf-8') as f:
                f.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + '\n')
            self._records[key] = record
        return response


def inspect_store(path: Path) -> Dict[str, Any]:
    """Summary of a store: record counts, duplicates, backends and token totals."""
    path = Path(path)
    records = load_store(path)
    lines = 0
    with open(path, 'r', encoding='utf-8') as f:
        lines = sum(1 for line in f if line.strip())
    backends = Counter(r['response']['backend'] for r in records.values())
    return {
        'path': str(path),
        'bytes': path.stat().st_size,
        'lines': lines,
        'records': len(records),
        'duplicates': lines - len(records),
        'backends': dict(sorted(backends.items())),
        'prompt_tokens': sum(r['response']['prompt_tokens'] for r in records.values()),
        'response_tokens': sum(r['response']['response_tokens'] for r in records.values()),
    }


def verify_store(path: Path) -> List[str]:
    """All problems in a store, one message per bad line; empty when clean."""
    path = Path(path)
    problems = []
    with open(path, 'r', encoding='utf-8') as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                _parse_line(line, line_no, path)
            except StoreCorrupt as e:
                problems.append(str(e))
    return problems


def compact_store(path: Path) -> Dict[str, int]:
    """
    Rewrite a store keeping the first valid record per hash.

    Corrupt lines are dropped with a warning. The rewrite goes through a
    temporary file and replaces the store atomically.
    """
    path = Path(path)
    kept: Dict[str, str] = {}
    duplicates = corrupt = 0
    with open(path, 'r', encoding='utf-8') as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                key, _ = _parse_line(line, line_no, path)
            except StoreCorrupt as e:
                logger.warning(f"Dropping {e}")
                corrupt += 1
                continue
            if key in kept:
                duplicates += 1
                continue
            kept[key] = line.rstrip('\n')

    tmp_path = path.with_suffix(path.suffix + '.tmp')
    with open(tmp_path, 'w', encoding='utf-8') as f:
        for line in kept.values():
            f.write(line + '\n')
    os.replace(tmp_path, path)
    return {'kept': len(kept), 'dropped_duplicates': duplicates, 'dropped_corrupt': corrupt}
