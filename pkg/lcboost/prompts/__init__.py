"""Prompt templates and reply parsers."""

from lcboost.prompts.parsers import (
    ParsedOption,
    Unparseable,
    is_null,
    parse_nullable,
    parse_option,
    parse_sentence_ids,
)
from lcboost.prompts.registry import (
    MissingBinding,
    PromptError,
    PromptRegistry,
    PromptTemplate,
    TaskExamples,
    UnknownTemplate,
    default_examples,
    default_registry,
    render,
)

__all__ = [
    'MissingBinding',
    'ParsedOption',
    'PromptError',
    'PromptRegistry',
    'PromptTemplate',
    'TaskExamples',
    'UnknownTemplate',
    'Unparseable',
    'default_examples',
    'default_registry',
    'is_null',
    'parse_nullable',
    'parse_option',
    'parse_sentence_ids',
    'render',
]
