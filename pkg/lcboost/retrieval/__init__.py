"""Chunk ranking for the Retrieve action."""

from lcboost.retrieval.base import (
    ChunkIndex,
    EmptyCorpus,
    RankedChunk,
    Scorer,
    build_index,
    get_scorer,
    index_terms,
    rank,
)

__all__ = [
    'ChunkIndex',
    'EmptyCorpus',
    'RankedChunk',
    'Scorer',
    'build_index',
    'get_scorer',
    'index_terms',
    'rank',
]
