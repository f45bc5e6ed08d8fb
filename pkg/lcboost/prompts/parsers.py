#!/usr/bin/env python3
"""
Parsers for structured prompt outputs.

All parsers are total: they either return a value or raise Unparseable, and
never depend on state. A NULL reply ("null", "Null.", '"null"') is returned
as None.
"""

import re
import string
from dataclasses import dataclass
from typing import List, Optional

from lcboost.constants import MAX_KEY_SENTENCES, PLAN_OPTIONS
from lcboost.prompts.registry import PromptError

INTEGER_RE = re.compile(r'(?<!\d)\d+(?!\d)')
SENTENCE_ID_RE = re.compile(r'\[s(\d+)\]')

# Trimmed from both ends before the null check
NULL_TRIM_CHARS = string.whitespace + string.punctuation + '“”‘’«»'


class Unparseable(PromptError):
    """A reply does not contain the expected structure."""


@dataclass(frozen=True)
class ParsedOption:
    option: int

    def __post_init__(self):
        if self.option not in PLAN_OPTIONS:
            raise ValueError(f"option must be one of {PLAN_OPTIONS}, got {self.option}")


def parse_option(response: str) -> ParsedOption:
    """
    First standalone integer in 1..4.

    Examples:
        >>> parse_option('[2]').option
        2
        >>> parse_option('I choose option 4 because...').option
        4
    """
    for match in INTEGER_RE.finditer(response):
        value = int(match.group(0))
        if value in PLAN_OPTIONS:
            return ParsedOption(option=value)
    raise Unparseable(f"no option in {PLAN_OPTIONS} found in reply {response[:80]!r}")


def is_null(response: str) -> bool:
    return response.strip(NULL_TRIM_CHARS).lower() == 'null'


def parse_nullable(response: str) -> Optional[str]:
    """
    None for a NULL reply, else the whitespace-trimmed text.

    Examples:
        >>> parse_nullable(' "Null". ') is None
        True
        >>> parse_nullable('8 papers')
        '8 papers'
    """
    if is_null(response):
        return None
    return response.strip()


def parse_sentence_ids(response: str, limit: int = MAX_KEY_SENTENCES) -> Optional[List[str]]:
    """
    Sentence identifiers in reply order, deduplicated and capped.

    Returns None for a NULL reply and an empty list when the reply names no
    identifiers.
    """
    if is_null(response):
        return None
    seen = []
    for match in SENTENCE_ID_RE.finditer(response):
        identifier = f"[s{int(match.group(1))}]"
        if identifier not in seen:
            seen.append(identifier)
            if len(seen) == limit:
                break
    return seen
