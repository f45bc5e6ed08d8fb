#!/usr/bin/env python3
"""
Tests for shared utilities.
"""

from lcboost.utils import canonical_json, format_time, sha256_text


def test_format_time():
    assert format_time(2.314) == '2.31s'
    assert format_time(245) == '4m 05s'
    assert format_time(3729) == '1h 02m 09s'


def test_canonical_json_is_key_order_independent():
    assert canonical_json({'b': 1, 'a': [1, 2]}) == '{"a":[1,2],"b":1}'
    assert sha256_text(canonical_json({'x': 'ü', 'y': 2})) == sha256_text(canonical_json({'y': 2, 'x': 'ü'}))
