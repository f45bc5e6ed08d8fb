#!/usr/bin/env python3
"""
Prompt template registry.

Templates live in templates/*.txt and are listed in manifest.json with their
required placeholders. Placeholders are {lowercase_names}; substitution is a
single pass, so braces inside bound values (code, JSON) are left untouched.

An optional block is a piece of a template that exists only when its
placeholder is bound, e.g. the query section of the Task Understanding
prompt for tasks without a query.

Usage:
    registry = default_registry()
    prompt = registry.render('append_extract', {'article': text, 'question': q})
"""

import json
import logging
import re
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import FrozenSet, List, Mapping, Optional

from lcboost.utils import load_yaml

logger = logging.getLogger(__name__)

PROMPTS_DIR = Path(__file__).parent
MANIFEST_PATH = PROMPTS_DIR / 'manifest.json'
EXAMPLES_PATH = PROMPTS_DIR / 'task_examples.yaml'

PLACEHOLDER_RE = re.compile(r'\{([a-z_][a-z0-9_]*)\}')


class PromptError(Exception):
    """Base class for prompt rendering and parsing errors."""


class MissingBinding(PromptError):
    """A required placeholder was not bound."""


class UnknownTemplate(PromptError, KeyError):
    """No template with the requested name."""

    def __str__(self):
        return str(self.args[0]) if self.args else ''


def placeholders(text: str) -> FrozenSet[str]:
    return frozenset(PLACEHOLDER_RE.findall(text))


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    body: str
    required: FrozenSet[str]
    optional_blocks: Mapping[str, str] = field(default_factory=dict)
    source: str = 'authored'

    def render(self, bindings: Mapping[str, Optional[str]]) -> str:
        """
        Substitute bindings into the body.

        Raises:
            MissingBinding: if a required placeholder is absent or None
        """
        missing = sorted(n for n in self.required if bindings.get(n) is None)
        if missing:
            raise MissingBinding(f"template '{self.name}' missing bindings: {', '.join(missing)}")

        body = self.body
        for name, block in self.optional_blocks.items():
            if not bindings.get(name):
                body = body.replace(block, '')

        return PLACEHOLDER_RE.sub(lambda m: str(bindings[m.group(1)]), body)


class PromptRegistry:
    """Immutable name -> PromptTemplate mapping."""

    def __init__(self, templates: Mapping[str, PromptTemplate]):
        self._templates = dict(templates)

    @classmethod
    def load(cls, manifest_path: Path = MANIFEST_PATH) -> 'PromptRegistry':
        """
        Load every template listed in a manifest.

        Raises:
            PromptError: if a template's placeholders disagree with the manifest
        """
        manifest_path = Path(manifest_path)
        with open(manifest_path, 'r', encoding='utf-8') as f:
            manifest = json.load(f)

        templates = {}
        for name, entry in manifest.items():
            path = manifest_path.parent / entry['file']
            body = path.read_text(encoding='utf-8')
            if body.endswith('\n'):
                body = body[:-1]

            required = frozenset(entry.get('required', []))
            blocks = dict(entry.get('optional_blocks', {}))
            for block_name, block in blocks.items():
                if block not in body:
                    raise PromptError(f"{path}: optional block for '{block_name}' not found in body")
                if placeholders(block) != {block_name}:
                    raise PromptError(f"{path}: optional block must hold exactly {{{block_name}}}")

            declared = required | set(blocks)
            found = placeholders(body)
            if found != declared:
                raise PromptError(f"{path}: placeholders {sorted(found)} do not match manifest "
                                  f"{sorted(declared)}")

            templates[name] = PromptTemplate(name=name, body=body, required=required,
                                             optional_blocks=blocks,
                                             source=entry.get('source', 'authored'))
        logger.debug(f"Loaded {len(templates)} prompt templates from {manifest_path}")
        return cls(templates)

    def get(self, name: str) -> PromptTemplate:
        if name not in self._templates:
            raise UnknownTemplate(f"Unknown prompt template '{name}'. Available: {self.names()}")
        return self._templates[name]

    def __contains__(self, name: str) -> bool:
        return name in self._templates

    def names(self) -> List[str]:
        return sorted(self._templates)

    def render(self, name: str, bindings: Mapping[str, Optional[str]]) -> str:
        return self.get(name).render(bindings)


@lru_cache(maxsize=None)
def default_registry() -> PromptRegistry:
    """The packaged templates, loaded once."""
    return PromptRegistry.load()


def render(name: str, bindings: Mapping[str, Optional[str]]) -> str:
    """Render a packaged template."""
    return default_registry().render(name, bindings)


@dataclass(frozen=True)
class TaskExamples:
    """Reference examples and strategy texts for the planning prompts."""
    strategies: Mapping[int, str]
    task_understanding: Mapping[str, str]
    query_rewrite: Mapping[str, str]

    @classmethod
    def load(cls, path: Path = EXAMPLES_PATH) -> 'TaskExamples':
        data = load_yaml(path)
        return cls(
            strategies={int(k): v.strip() for k, v in (data.get('strategies') or {}).items()},
            task_understanding={k: v.strip() for k, v in (data.get('task_understanding') or {}).items()},
            query_rewrite={k: v.strip() for k, v in (data.get('query_rewrite') or {}).items()},
        )

    def understanding_examples(self, category: str) -> str:
        return self.task_understanding.get(category, self.task_understanding.get('default', ''))

    def rewrite_examples(self, category: str) -> str:
        return self.query_rewrite.get(category, self.query_rewrite.get('default', ''))

    def strategy(self, option: int) -> str:
        return self.strategies.get(option, '')


@lru_cache(maxsize=None)
def default_examples() -> TaskExamples:
    return TaskExamples.load()
