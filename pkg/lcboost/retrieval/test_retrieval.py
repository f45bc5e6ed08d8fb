#!/usr/bin/env python3
"""
Tests for the chunk index and BM25 ranking.
"""

import math
import random

import pytest

from lcboost.retrieval import EmptyCorpus, build_index, rank
from lcboost.text_segmentation import Chunk


def make_chunks(*texts):
    return [Chunk(index=i, text=t, char_span=(0, len(t)), token_count=0)
            for i, t in enumerate(texts)]


def test_build_index_counts_document_frequency():
    index = build_index(make_chunks('alpha beta'))
    assert index.doc_freqs['alpha'] == 1
    assert index.doc_freqs['beta'] == 1
    assert index.lengths == (2,)


def test_build_index_lowercases_and_skips_punctuation():
    index = build_index(make_chunks('Alpha, ALPHA beta!'))
    assert dict(index.term_freqs[0]) == {'alpha': 2, 'beta': 1}


def test_duplicate_chunks_indexed_separately():
    index = build_index(make_chunks('same text', 'same text'))
    assert index.size == 2
    assert index.doc_freqs['same'] == 2
    assert index.term_freqs[0] == index.term_freqs[1]


def test_empty_corpus():
    with pytest.raises(EmptyCorpus):
        build_index([])


def test_singleton_corpus_ranked_first():
    index = build_index(make_chunks('anything at all'))
    ranked = rank(index, 'unrelated query', k=3)
    assert [r.chunk_index for r in ranked] == [0]


def test_bm25_hand_computed():
    index = build_index(make_chunks('cat sat', 'dog ran'))
    ranked = rank(index, 'cat', k=2)
    assert [r.chunk_index for r in ranked] == [0, 1]
    # idf = ln((2 - 1 + 0.5) / (1 + 0.5) + 1) = ln 2; tf part = 2.5 / 2.5 = 1
    assert ranked[0].score == pytest.approx(math.log(2))
    assert ranked[1].score == 0.0


def test_no_shared_terms_keeps_chunk_order():
    index = build_index(make_chunks('a b', 'c d', 'e f'))
    ranked = rank(index, 'zzz', k=5)
    assert [r.chunk_index for r in ranked] == [0, 1, 2]
    assert all(r.score == 0.0 for r in ranked)


def test_k_clamped_to_corpus_size():
    index = build_index(make_chunks('x', 'y'))
    assert len(rank(index, 'x', k=10)) == 2
    with pytest.raises(ValueError):
        rank(index, 'x', k=0)


def test_term_in_every_chunk_still_positive():
    index = build_index(make_chunks('the cat', 'the dog', 'the bird'))
    ranked = rank(index, 'the', k=3)
    assert all(r.score > 0 for r in ranked)


def test_matching_chunk_outscores_non_matching():
    rng = random.Random(3)
    vocab = [f'w{i}' for i in range(30)]
    for _ in range(100):
        texts = [' '.join(rng.choice(vocab) for _ in range(rng.randint(0, 40)))
                 for _ in range(rng.randint(1, 8))]
        query = ' '.join(rng.sample(vocab, 3))
        index = build_index(make_chunks(*texts))
        ranked = rank(index, query, k=len(texts))
        query_terms = set(query.split())
        hits = [r.score for r in ranked if query_terms & set(texts[r.chunk_index].split())]
        misses = [r.score for r in ranked if not query_terms & set(texts[r.chunk_index].split())]
        if hits and misses:
            assert min(hits) > max(misses)
        assert all(s == 0.0 for s in misses)


def test_permuting_insertion_order_keeps_ranking():
    rng = random.Random(8)
    texts = ['red apple pie', 'green apple', 'blue sky', 'red red car', 'apple']
    chunks = make_chunks(*texts)
    expected = rank(build_index(chunks), 'red apple', k=5)
    for _ in range(10):
        shuffled = chunks[:]
        rng.shuffle(shuffled)
        assert rank(build_index(shuffled), 'red apple', k=5) == expected


def test_rank_is_pure():
    index = build_index(make_chunks('one two', 'two three'))
    assert rank(index, 'two', k=2) == rank(index, 'two', k=2)
