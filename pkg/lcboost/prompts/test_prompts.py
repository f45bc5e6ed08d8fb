#!/usr/bin/env python3
"""
Tests for the template registry and reply parsers.
"""

import json

import pytest

from lcboost.prompts import (
    MissingBinding,
    PromptError,
    PromptRegistry,
    UnknownTemplate,
    Unparseable,
    default_examples,
    default_registry,
    parse_nullable,
    parse_option,
    parse_sentence_ids,
    render,
)
from lcboost.prompts.registry import PLACEHOLDER_RE


def full_bindings(template):
    names = set(template.required) | set(template.optional_blocks)
    return {name: f'value of {name}' for name in names}


def test_task_understanding_renders_chunk_by_chunk():
    text = render('task_understanding', {'task_prompt': 'Answer the question.',
                                         'input_query': 'Who?', 'examples': 'none'})
    assert 'chunk by chunk' in text
    assert 'Below is the query:\nWho?' in text


def test_query_block_omitted_without_query():
    text = render('task_understanding', {'task_prompt': 'Summarize.', 'examples': 'none'})
    assert 'Below is the query' not in text
    assert 'Below is the original task prompt:\nSummarize.\n\nYou have the following options' in text
    assert text == render('task_understanding', {'task_prompt': 'Summarize.', 'examples': 'none',
                                                 'input_query': None})


def test_append_template_text():
    text = render('append_extract', {'article': '[s1] A.', 'question': 'q'})
    assert 'Select up to ten key sentences' in text
    assert 'Example: [s39],[s54]' in text


def test_missing_binding():
    with pytest.raises(MissingBinding):
        render('scan_answer', {'context': 'text'})
    with pytest.raises(MissingBinding):
        render('scan_answer', {'context': 'text', 'question': None})


def test_unknown_template():
    with pytest.raises(UnknownTemplate):
        render('no_such_template', {})
    with pytest.raises(KeyError):
        default_registry().get('no_such_template')


def test_every_template_renders_without_placeholders():
    registry = default_registry()
    for name in registry.names():
        template = registry.get(name)
        text = template.render(full_bindings(template))
        assert not PLACEHOLDER_RE.search(text), name
        assert text == template.render(full_bindings(template))


def test_bound_braces_not_rescanned():
    text = render('answer_lcc', {'context': 'def f():\n    return {question}\n'})
    assert '{question}' in text


def test_registry_rejects_mismatched_manifest(tmp_path):
    (tmp_path / 'a.txt').write_text('Hello {name} and {other}\n')
    manifest = tmp_path / 'manifest.json'
    manifest.write_text(json.dumps({'a': {'file': 'a.txt', 'required': ['name']}}))
    with pytest.raises(PromptError):
        PromptRegistry.load(manifest)

    manifest.write_text(json.dumps({'a': {'file': 'a.txt', 'required': ['name', 'other']}}))
    registry = PromptRegistry.load(manifest)
    assert registry.render('a', {'name': 'x', 'other': 'y'}) == 'Hello x and y'


def test_reference_templates_flagged():
    registry = default_registry()
    assert registry.get('task_understanding').source == 'reference'
    assert registry.get('compress').source == 'authored'


def test_task_examples():
    examples = default_examples()
    assert examples.strategy(3).startswith('Extract')
    assert 'Answer: 2' in examples.understanding_examples('summarization')
    assert examples.understanding_examples('qa') == examples.understanding_examples('default')
    assert 'Extract paper information' in examples.rewrite_examples('synthetic')


# --- parsers ---

def test_parse_option():
    assert parse_option('[2]').option == 2
    assert parse_option('I choose option 4 because it is faster').option == 4
    assert parse_option('Option 12 is invalid; [3] then').option == 3
    with pytest.raises(Unparseable):
        parse_option('maybe')
    with pytest.raises(Unparseable):
        parse_option('0 or 5')


def test_parse_nullable():
    assert parse_nullable('null') is None
    assert parse_nullable(' "Null". ') is None
    assert parse_nullable('“NULL”') is None
    assert parse_nullable('8 papers') == '8 papers'
    assert parse_nullable('  null pointer  ') == 'null pointer'
    assert parse_nullable('') == ''


def test_parse_sentence_ids():
    assert parse_sentence_ids('[s39],[s54]') == ['[s39]', '[s54]']
    assert parse_sentence_ids('null') is None
    assert parse_sentence_ids('[s2], [s2], [s1]') == ['[s2]', '[s1]']
    many = ','.join(f'[s{i}]' for i in range(1, 13))
    assert parse_sentence_ids(many) == [f'[s{i}]' for i in range(1, 11)]
    assert parse_sentence_ids('none of them') == []
