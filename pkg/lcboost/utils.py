"""
Shared utilities for the engine, harness and CLI.

Provides logging setup, YAML loading, stable hashing, JSON writing and the
duration strings used in run logs.
"""

import hashlib
import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, Optional

import yaml


def setup_logging(log_dir: Optional[str] = None, log_file: bool = False,
                  console_level: str = 'INFO', file_level: str = 'DEBUG') -> logging.Logger:
    """
    Configure logging to console (stderr) and optionally to a file.

    Args:
        log_dir: Directory for the log file (required when log_file is True)
        log_file: Whether to also log to <log_dir>/lcboost.log
        console_level: Console handler level name
        file_level: File handler level name

    Returns:
        The root logger
    """
    logger = logging.getLogger()
    logger.setLevel(logging.DEBUG)

    # Re-running setup (tests, repeated CLI calls) must not stack handlers
    for handler in list(logger.handlers):
        if getattr(handler, '_lcboost', False):
            logger.removeHandler(handler)

    console_handler = logging.StreamHandler()
    console_handler.setLevel(getattr(logging, console_level.upper()))
    console_handler.setFormatter(logging.Formatter('%(levelname)s: %(message)s'))
    console_handler._lcboost = True
    logger.addHandler(console_handler)

    if log_file and log_dir:
        os.makedirs(log_dir, exist_ok=True)
        file_handler = logging.FileHandler(os.path.join(log_dir, 'lcboost.log'))
        file_handler.setLevel(getattr(logging, file_level.upper()))
        file_handler.setFormatter(
            logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s'))
        file_handler._lcboost = True
        logger.addHandler(file_handler)

    return logger


def load_yaml(path: Path) -> Dict[str, Any]:
    """Load a YAML mapping; an empty file yields an empty dict."""
    with open(path, 'r', encoding='utf-8') as f:
        data = yaml.safe_load(f)
    return data or {}


def sha256_text(text: str) -> str:
    """Hex SHA-256 of a UTF-8 string."""
    return hashlib.sha256(text.encode('utf-8')).hexdigest()


def canonical_json(data: Any) -> str:
    """Byte-stable JSON used for hashing and golden comparisons."""
    return json.dumps(data, ensure_ascii=False, sort_keys=True, separators=(',', ':'))


def write_json(data: Any, path: Path) -> None:
    """Write pretty JSON, creating parent directories."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(data, f, indent=2, ensure_ascii=False, sort_keys=True)
        f.write('\n')


def format_time(seconds: float) -> str:
    """Suite wall time for log lines: '2.31s', '4m 05s' or '1h 02m 09s'."""
    if seconds < 60:
        return f"{seconds:.2f}s"
    minutes, secs = divmod(int(seconds), 60)
    if minutes < 60:
        return f"{minutes}m {secs:02d}s"
    hours, minutes = divmod(minutes, 60)
    return f"{hours}h {minutes:02d}m {secs:02d}s"
