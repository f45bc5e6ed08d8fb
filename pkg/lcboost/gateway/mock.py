#!/usr/bin/env python3
"""
Scripted mock backend for offline runs and oracle tests.

Rules are tried in order and the first match wins. A matcher is either a
literal substring of the prompt or a regular expression matched from the
start of the prompt (re.match, DOTALL). The last rule must match anything.

A template is either a str, formatted with the match groups ({0} is the whole
match, {1}.. positional groups, named groups by name, {prompt} the prompt),
or a callable fn(prompt, match) -> str where match is None for literal rules.

Usage:
    backend = script_mock([
        Rule.pattern(r'.*Question: (\\w+)', 'you asked {1}'),
        ('', 'null'),
    ])
"""

import logging
import re
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List, Match, Optional, Sequence, Tuple, Union

from lcboost.gateway.base import (
    Backend,
    CompletionRequest,
    CompletionResponse,
    InvalidRuleSet,
    apply_stop_sequences,
)
from lcboost.text_segmentation import clip_tokens, count_tokens
from lcboost.utils import load_yaml

logger = logging.getLogger(__name__)

Template = Union[str, Callable[[str, Optional[Match]], str]]

ECHO = '{prompt}'

# Regexes that match every prompt
CATCH_ALL_PATTERNS = {'', '.*', '(?s).*'}


@dataclass(frozen=True)
class Rule:
    matcher: str
    template: Template
    regex: bool = False

    @classmethod
    def literal(cls, text: str, template: Template) -> 'Rule':
        return cls(matcher=text, template=template, regex=False)

    @classmethod
    def pattern(cls, expr: str, template: Template) -> 'Rule':
        return cls(matcher=expr, template=template, regex=True)

    @property
    def is_catch_all(self) -> bool:
        if self.regex:
            return self.matcher in CATCH_ALL_PATTERNS
        return self.matcher == ''


RuleLike = Union[Rule, Tuple[str, Template]]


class MockBackend(Backend):
    """Deterministic backend driven by an ordered rule list."""

    def __init__(self, rules: Sequence[Rule], name: str = 'mock'):
        self.name = name
        self.rules = tuple(rules)
        self._compiled = [re.compile(r.matcher, re.DOTALL) if r.regex else None for r in self.rules]
        self._lock = threading.Lock()
        self.prompts: List[str] = []

    def _render(self, rule: Rule, prompt: str, match: Optional[Match]) -> str:
        if callable(rule.template):
            return str(rule.template(prompt, match))
        if match is None:
            return rule.template.format(prompt=prompt)
        return rule.template.format(match.group(0), *match.groups(),
                                    prompt=prompt, **match.groupdict())

    def respond(self, prompt: str) -> str:
        """Raw rule output for a prompt, before clipping."""
        for rule, compiled in zip(self.rules, self._compiled):
            if compiled is not None:
                match = compiled.match(prompt)
                if match:
                    return self._render(rule, prompt, match)
            elif rule.matcher in prompt:
                return self._render(rule, prompt, None)
        # Unreachable with a validated rule set
        raise InvalidRuleSet("no rule matched")

    def generate(self, request: CompletionRequest) -> CompletionResponse:
        with self._lock:
            self.prompts.append(request.prompt)
        text = self.respond(request.prompt)
        text = apply_stop_sequences(text, request.stop_sequences)
        text = clip_tokens(text, request.max_output_tokens)
        return CompletionResponse(
            text=text,
            prompt_tokens=count_tokens(request.prompt),
            response_tokens=count_tokens(text),
            backend=self.name,
        )


def script_mock(rules: Sequence[RuleLike], name: str = 'mock') -> MockBackend:
    """
    Build a mock backend from ordered rules.

    Plain (matcher, template) tuples are literal-substring rules.

    Raises:
        InvalidRuleSet: if there are no rules or the last one is not a catch-all
    """
    normalized = [r if isinstance(r, Rule) else Rule.literal(*r) for r in rules]
    if not normalized:
        raise InvalidRuleSet("mock needs at least one rule")
    if not normalized[-1].is_catch_all:
        raise InvalidRuleSet(
            f"last mock rule must be a catch-all ('' literal or '.*' pattern), got {normalized[-1].matcher!r}")
    for rule in normalized:
        if rule.regex:
            try:
                re.compile(rule.matcher)
            except re.error as e:
                raise InvalidRuleSet(f"bad pattern {rule.matcher!r}: {e}") from e
    return MockBackend(normalized, name=name)


def load_mock_rules(path: Path) -> MockBackend:
    """
    Load a rule set from YAML.

    File layout:
        rules:
          - {pattern: '(?s).*Question: (.*)', template: '{1}'}
          - {literal: '', template: 'null'}
    """
    data = load_yaml(path)
    rules = []
    for i, item in enumerate(data.get('rules') or []):
        template = item.get('template', '')
        if 'pattern' in item:
            rules.append(Rule.pattern(item['pattern'], template))
        elif 'literal' in item:
            rules.append(Rule.literal(item['literal'], template))
        else:
            raise InvalidRuleSet(f"{path}: rule {i} needs 'pattern' or 'literal'")
    logger.info(f"Loaded {len(rules)} mock rules from {path}")
    return script_mock(rules, name=data.get('name', 'mock'))
