#!/usr/bin/env python3
"""
BM25 scorer (default).

Uses the non-negative idf variant log((N - df + 0.5) / (df + 0.5) + 1), so
every shared term contributes a strictly positive amount even when it occurs
in every chunk.
"""

from math import log
from typing import List, Sequence

from lcboost.retrieval.base import ChunkIndex, Scorer, register_scorer


@register_scorer
class BM25Scorer(Scorer):
    name = 'bm25'

    def idf(self, index: ChunkIndex, term: str) -> float:
        df = index.doc_freqs.get(term, 0)
        return log((index.size - df + 0.5) / (df + 0.5) + 1.0)

    def score(self, index: ChunkIndex, query_terms: Sequence[str]) -> List[float]:
        k1, b = index.k1, index.b
        # All-empty corpus: length normalization degenerates to 1
        avg = index.avg_length or 1.0

        idfs = {t: self.idf(index, t) for t in query_terms if t in index.doc_freqs}
        scores = []
        for tf, length in zip(index.term_freqs, index.lengths):
            total = 0.0
            norm = k1 * (1 - b + b * length / avg)
            for term, idf in idfs.items():
                freq = tf.get(term, 0)
                if freq:
                    total += idf * (freq * (k1 + 1)) / (freq + norm)
            scores.append(total)
        return scores
