"""
Tokenization approximation and long-context decomposition.

A token is a maximal run of alphanumeric characters or a single other
non-whitespace character; whitespace yields no tokens. This local count is
what every window and budget check in the engine is measured in.

Functions here are pure and safe to call from any number of workers.
"""

import re
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

# [^\W_] is exactly str.isalnum(); '_' and punctuation are single tokens
TOKEN_RE = re.compile(r'[^\W_]+|[^\w\s]|_')

# Split-point classes, in preference order. Positions are match ends, i.e.
# whitespace is kept with the text that precedes it.
PARAGRAPH_BREAK_RE = re.compile(r'\n[^\S\n]*\n\s*')
SENTENCE_BREAK_RE = re.compile(r'[.!?]+\s+|\n\s*')
WHITESPACE_BREAK_RE = re.compile(r'\s+')

# Separates the kept head and tail of a middle-truncated document
TRUNCATION_JOINER = '\n'

Span = Tuple[int, int]


def token_spans(text: str) -> List[Span]:
    """Half-open character spans of every token in text."""
    return [m.span() for m in TOKEN_RE.finditer(text)]


def count_tokens(text: str) -> int:
    """
    Count local tokens.

    Examples:
        >>> count_tokens('')
        0
        >>> count_tokens('hello, world')
        3
    """
    return sum(1 for _ in TOKEN_RE.finditer(text))


def clip_tokens(text: str, limit: int) -> str:
    """Keep the first `limit` tokens of text (original characters preserved)."""
    if limit <= 0:
        return ''
    spans = token_spans(text)
    if len(spans) <= limit:
        return text
    return text[:spans[limit - 1][1]]


@dataclass(frozen=True)
class ContextDocument:
    """A (possibly long) input context with its local token count."""
    text: str
    token_count: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, 'token_count', count_tokens(self.text))


@dataclass(frozen=True)
class Chunk:
    """One decomposed short context."""
    index: int
    text: str
    char_span: Span
    token_count: int
    # True when no whitespace boundary was available and the cut falls
    # between two adjacent tokens of one non-whitespace run
    hard_split: bool = False


@dataclass(frozen=True)
class Sentence:
    identifier: str
    char_span: Span  # relative to the chunk text


@dataclass(frozen=True)
class SentenceAnnotatedChunk:
    """A chunk whose sentences carry [s1]..[sN] identifiers."""
    chunk: Chunk
    sentences: Tuple[Sentence, ...]

    def sentence_text(self, identifier: str) -> Optional[str]:
        """Stripped text of a sentence, or None for an unknown identifier."""
        for sentence in self.sentences:
            if sentence.identifier == identifier:
                start, end = sentence.char_span
                return self.chunk.text[start:end].strip()
        return None

    def render(self) -> str:
        """Chunk text with "[s{k}] " prepended to each sentence."""
        text = self.chunk.text
        return ''.join(f"{s.identifier} {text[s.char_span[0]:s.char_span[1]]}"
                       for s in self.sentences)


def _break_positions(pattern: re.Pattern, text: str) -> List[int]:
    return [m.end() for m in pattern.finditer(text)]


def _latest_boundary(boundaries: Sequence[int], lo: int, hi: int) -> Optional[int]:
    """Largest boundary b with lo <= b <= hi, if any."""
    idx = bisect_right(boundaries, hi) - 1
    if idx >= 0 and boundaries[idx] >= lo:
        return boundaries[idx]
    return None


def decompose(doc: ContextDocument, chunk_budget: int) -> List[Chunk]:
    """
    Decompose a document into contiguous chunks of at most chunk_budget tokens.

    Each cut is placed at the latest paragraph boundary that keeps the chunk
    within budget, else the latest sentence boundary, else the latest
    whitespace, else between two adjacent tokens (flagged hard_split).
    Concatenating the chunk texts reproduces doc.text exactly.

    Args:
        doc: Document to split
        chunk_budget: Maximum tokens per chunk (>= 1)

    Returns:
        Chunks in document order
    """
    if chunk_budget < 1:
        raise ValueError(f"chunk_budget must be >= 1, got {chunk_budget}")

    text = doc.text
    spans = token_spans(text)
    n_tokens = len(spans)
    if n_tokens <= chunk_budget:
        return [Chunk(index=0, text=text, char_span=(0, len(text)), token_count=n_tokens)]

    starts = [s for s, _ in spans]
    boundary_sets = (
        _break_positions(PARAGRAPH_BREAK_RE, text),
        _break_positions(SENTENCE_BREAK_RE, text),
        _break_positions(WHITESPACE_BREAK_RE, text),
    )

    chunks: List[Chunk] = []
    start = 0
    ti = 0
    while n_tokens - ti > chunk_budget:
        lo = spans[ti][1]                  # at least one token per chunk
        hi = spans[ti + chunk_budget][0]   # never reach the (budget+1)th token
        cut = None
        for boundaries in boundary_sets:
            cut = _latest_boundary(boundaries, lo, hi)
            if cut is not None:
                break
        hard = cut is None
        if hard:
            cut = hi

        next_ti = bisect_left(starts, cut)
        chunks.append(Chunk(index=len(chunks), text=text[start:cut], char_span=(start, cut),
                            token_count=next_ti - ti, hard_split=hard))
        start, ti = cut, next_ti

    chunks.append(Chunk(index=len(chunks), text=text[start:], char_span=(start, len(text)),
                        token_count=n_tokens - ti))
    return chunks


def annotate_sentences(chunk: Chunk) -> SentenceAnnotatedChunk:
    """
    Split a chunk into sentences and number them [s1]..[sN].

    Sentences end at terminal punctuation (. ! ?) followed by whitespace, or
    at a newline. Whitespace-only segments are folded into a neighbour, so
    the spans partition the chunk text whenever it has any sentence at all.
    """
    text = chunk.text
    if not text.strip():
        return SentenceAnnotatedChunk(chunk=chunk, sentences=())

    cuts = [0] + _break_positions(SENTENCE_BREAK_RE, text) + [len(text)]
    segments = [(a, b) for a, b in zip(cuts, cuts[1:]) if b > a]

    spans: List[Span] = []
    carry = None
    for s, e in segments:
        if not text[s:e].strip():
            if spans:
                spans[-1] = (spans[-1][0], e)
            elif carry is None:
                carry = s
            continue
        if carry is not None:
            s, carry = carry, None
        spans.append((s, e))

    sentences = tuple(Sentence(identifier=f"[s{k}]", char_span=span)
                      for k, span in enumerate(spans, start=1))
    return SentenceAnnotatedChunk(chunk=chunk, sentences=sentences)


def truncate_middle(doc: ContextDocument, limit: int) -> ContextDocument:
    """
    Keep the first ceil(limit/2) and last floor(limit/2) tokens.

    The kept spans retain their original text and are joined with a newline.
    Documents already within the limit are returned unchanged.
    """
    if limit < 2:
        raise ValueError(f"limit must be >= 2, got {limit}")
    if doc.token_count <= limit:
        return doc

    spans = token_spans(doc.text)
    head = (limit + 1) // 2
    tail = limit // 2
    head_end = spans[head - 1][1]
    tail_start = spans[len(spans) - tail][0]
    return ContextDocument(doc.text[:head_end] + TRUNCATION_JOINER + doc.text[tail_start:])
