#!/usr/bin/env python3
"""
Chunk index and the pluggable scorer interface.

The index is built once per run from the decomposed chunks and is read-only
afterwards, so concurrent rank() calls are safe.

Usage:
    index = build_index(chunks)
    top = rank(index, "who wrote the letter", k=3)
    [r.chunk_index for r in top]
"""

from abc import ABC, abstractmethod
from collections import Counter
from dataclasses import dataclass
from types import MappingProxyType
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from lcboost.constants import BM25_B, BM25_K1
from lcboost.text_segmentation import TOKEN_RE, Chunk


class EmptyCorpus(ValueError):
    """Raised when an index is requested over zero chunks."""


def index_terms(text: str) -> List[str]:
    """Lowercased alphanumeric token runs; punctuation tokens are not terms."""
    return [t.lower() for t in TOKEN_RE.findall(text) if t.isalnum()]


@dataclass(frozen=True)
class ChunkIndex:
    """Term statistics over one chunk set."""
    chunk_ids: Tuple[int, ...]
    term_freqs: Tuple[Mapping[str, int], ...]
    lengths: Tuple[int, ...]
    doc_freqs: Mapping[str, int]
    avg_length: float
    k1: float = BM25_K1
    b: float = BM25_B

    @property
    def size(self) -> int:
        return len(self.chunk_ids)


@dataclass(frozen=True)
class RankedChunk:
    chunk_index: int
    score: float


class Scorer(ABC):
    """Scores every indexed chunk against a list of query terms."""

    name: str = ''

    @abstractmethod
    def score(self, index: ChunkIndex, query_terms: Sequence[str]) -> List[float]:
        """
        Score all chunks.

        Returns:
            One non-negative score per chunk, aligned with index.chunk_ids.
            Chunks sharing no term with the query must score exactly 0.
        """
        pass


def build_index(chunks: Sequence[Chunk], k1: float = BM25_K1, b: float = BM25_B) -> ChunkIndex:
    """
    Build a ChunkIndex. Duplicate chunks are indexed separately.

    Raises:
        EmptyCorpus: if chunks is empty
    """
    if not chunks:
        raise EmptyCorpus("cannot index an empty chunk list")

    term_freqs = []
    lengths = []
    doc_freqs: Dict[str, int] = Counter()
    for chunk in chunks:
        tf = Counter(index_terms(chunk.text))
        term_freqs.append(MappingProxyType(dict(tf)))
        lengths.append(sum(tf.values()))
        doc_freqs.update(tf.keys())

    return ChunkIndex(
        chunk_ids=tuple(c.index for c in chunks),
        term_freqs=tuple(term_freqs),
        lengths=tuple(lengths),
        doc_freqs=MappingProxyType(dict(doc_freqs)),
        avg_length=sum(lengths) / len(lengths),
        k1=k1,
        b=b,
    )


# Registry of available scorers, filled by implementation modules
SCORERS: Dict[str, type] = {}


def register_scorer(cls: type) -> type:
    SCORERS[cls.name] = cls
    return cls


def get_scorer(name: str = 'bm25') -> Scorer:
    """Instantiate a registered scorer by config name."""
    # Implementations register on import
    from lcboost.retrieval import bm25  # noqa: F401

    if name not in SCORERS:
        raise KeyError(f"Unknown scorer '{name}'. Available: {sorted(SCORERS)}")
    return SCORERS[name]()


def rank(index: ChunkIndex, query: str, k: int,
         scorer: Optional[Scorer] = None) -> List[RankedChunk]:
    """
    Top-k chunks for a query, sorted by (score desc, chunk index asc).

    A query sharing no term with the corpus yields all-zero scores, so the
    result is simply the first k chunks in index order.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    scorer = scorer or get_scorer()

    # Repeated query words count once
    query_terms = list(dict.fromkeys(index_terms(query)))
    scores = scorer.score(index, query_terms)

    ranked = sorted(
        (RankedChunk(chunk_index=cid, score=s) for cid, s in zip(index.chunk_ids, scores)),
        key=lambda r: (-r.score, r.chunk_index),
    )
    return ranked[:k]
