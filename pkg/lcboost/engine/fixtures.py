#!/usr/bin/env python3
"""
Synthetic corpora with known answers, and the scripted mock rules that
solve them.

Every generator takes a random.Random so a seed reproduces the corpus.
Filler text comes from a vocabulary that never contains a planted keyword,
which keeps the oracles (regex counts on the raw text) independent of the
engine.

Fixtures:
    counting_fixture       paper list; count the single-author entries
    planted_names_fixture  four names planted at 10/35/60/85% of the text
    planted_answer_fixture one chunk holds "The secret code word is zephyr."
    summary_fixture        a report to summarize (merge vs brute force)
    fuzz_corpus            mixed prose, code, dense sentences and long runs
"""

import random
import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

from lcboost.config import RunConfig
from lcboost.constants import CATEGORY_QA, CATEGORY_SUMMARIZATION, CATEGORY_SYNTHETIC
from lcboost.gateway import MockBackend, Rule, create_gateway, script_mock
from lcboost.gateway.mock import RuleLike
from lcboost.text_segmentation import ContextDocument, token_spans
from lcboost.engine.engine import LCBoostEngine
from lcboost.engine.types import TaskSpec

FILLER_WORDS = (
    'river', 'stone', 'autumn', 'lantern', 'harbor', 'meadow', 'copper', 'valley',
    'quiet', 'morning', 'garden', 'shadow', 'bridge', 'candle', 'forest', 'winter',
    'orchard', 'pebble', 'silver', 'thunder', 'willow', 'market', 'evening', 'cloud',
    'ladder', 'velvet', 'hollow', 'timber', 'meander', 'basket', 'feather', 'granite',
    'slowly', 'gently', 'across', 'beneath', 'beyond', 'toward', 'along', 'over',
    'walked', 'carried', 'painted', 'gathered', 'watched', 'folded', 'drifted', 'counted',
    'a', 'an', 'and', 'of', 'to', 'in', 'with', 'from', 'by', 'near',
)

# Literal markers that identify each packaged prompt
MARK_UNDERSTANDING = 'select one of the options by only outputting'
MARK_REWRITE = 'If the query needs to be rewritten'
MARK_APPEND = 'Select up to ten key sentences'
MARK_MERGE = 'Summarize the partial article to supplement'
MARK_COMPRESS = 'Rewrite the notes as concisely as possible'
MARK_SCAN = 'If no answer can be found in the text'
MARK_CODE_SCAN = 'is not enough to predict the next line'
MARK_ANSWER_SELF = 'Read the following information carefully'
MARK_GOV_REPORT = 'You are given a report by a government agency'

ARTICLE_RE = re.compile(r'The article begins as follows:\n(.*)\nThe article concludes here\.', re.DOTALL)
ANNOTATED_SENTENCE_RE = re.compile(r"(\[s\d+\]) ((?:(?!\[s\d+\])[^\n])*)")

COUNTING_QUERY = 'How many papers in ACL 2023 only have one author?'
COUNTING_REWRITE = 'Extract paper information in the following list that have only one author'
PAPER_LINE_RE = re.compile(r'^Paper (\d+): ([^|\n]*)\| Authors: ([^\n]*)$', re.MULTILINE)

AUTHOR_NAMES = ('Mara Quint', 'Oskar Lind', 'Ines Varga', 'Tomas Reyes', 'Lena Brandt',
                'Yusuf Okafor', 'Nadia Petrov', 'Hugo Sato', 'Clara Nunes', 'Emil Dahl')
TITLE_WORDS = ('Sparse', 'Neural', 'Parsing', 'Retrieval', 'Graphs', 'Dialogue', 'Alignment',
               'Efficient', 'Multilingual', 'Decoding', 'Semantic', 'Transfer')

PLANTED_NAMES = ('Ada Lovelace', 'Grace Hopper', 'Alan Turing', 'Edsger Dijkstra')
PLANTED_POSITIONS = (0.10, 0.35, 0.60, 0.85)
NAMES_QUERY = 'Who was seen near the old mill?'

SECRET_QUERY = 'What is the secret code word?'
SECRET_SENTENCE = 'The secret code word is zephyr.'
SECRET_ANSWER = 'zephyr'


@dataclass
class Fixture:
    """A task, its document, gold answers and the rules that solve it."""
    task: TaskSpec
    doc: ContextDocument
    answers: List[str]
    rules: List[RuleLike] = field(default_factory=list)


# ----------------------------------------------------------------------
# Text generation
# ----------------------------------------------------------------------

def filler_sentence(rng: random.Random, n_words: int) -> str:
    words = [rng.choice(FILLER_WORDS) for _ in range(max(1, n_words))]
    words[0] = words[0].capitalize()
    return ' '.join(words) + '.'


def filler_paragraph(rng: random.Random, n_tokens: int) -> str:
    """About n_tokens local tokens of prose (each sentence adds one '.' token)."""
    sentences = []
    remaining = max(2, n_tokens)
    while remaining > 1:
        n_words = min(remaining - 1, rng.randint(6, 14))
        sentences.append(filler_sentence(rng, n_words))
        remaining -= n_words + 1
    return ' '.join(sentences)


def filler_paragraphs(rng: random.Random, n_tokens: int, paragraph_tokens: int = 120) -> List[str]:
    paragraphs = []
    while n_tokens > 0:
        size = min(n_tokens, rng.randint(paragraph_tokens // 2, paragraph_tokens))
        paragraphs.append(filler_paragraph(rng, size))
        n_tokens -= size
    return paragraphs


def interleave(rng: random.Random, planted: Sequence[str], total_tokens: int,
               positions: Optional[Sequence[float]] = None, gap_min: int = 0) -> str:
    """
    Place planted paragraphs among filler paragraphs.

    positions gives each planted paragraph's relative offset; without it
    they are spread evenly. gap_min is the least filler between two planted
    paragraphs.
    """
    n = len(planted)
    if positions is None:
        positions = [(i + 1) / (n + 1) for i in range(n)]
    filler_total = max(total_tokens, gap_min * (n + 1))
    cuts = [int(p * filler_total) for p in positions]
    bounds = [0] + cuts + [filler_total]
    parts: List[str] = []
    for i in range(n + 1):
        gap = max(gap_min, bounds[i + 1] - bounds[i])
        parts.extend(filler_paragraphs(rng, gap))
        if i < n:
            parts.append(planted[i])
    return '\n\n'.join(parts)


# ----------------------------------------------------------------------
# Mock rule helpers
# ----------------------------------------------------------------------

def article_of(prompt: str) -> str:
    match = ARTICLE_RE.search(prompt)
    return match.group(1) if match else ''


def sentence_picker(keep: Callable[[str], bool]) -> Callable:
    """Mock template answering the extraction prompt with ids of kept sentences."""
    def pick(prompt: str, match) -> str:
        ids = [m.group(1) for m in ANNOTATED_SENTENCE_RE.finditer(article_of(prompt))
               if keep(m.group(2))]
        return ','.join(ids) if ids else 'null'
    return pick


def make_engine(rules: Iterable[RuleLike], config: Optional[RunConfig] = None,
                name: str = 'mock') -> Tuple[LCBoostEngine, MockBackend]:
    """Engine over a fresh scripted mock and ledger."""
    config = (config or RunConfig()).with_overrides(backend='mock')
    mock = script_mock(list(rules), name=name)
    return LCBoostEngine(create_gateway(config, inner=mock), config), mock


# ----------------------------------------------------------------------
# Counting
# ----------------------------------------------------------------------

COUNTING_CONFIG = RunConfig(chunk_budget=1024, evidence_budget=1536, prompt_reserve=1024)


def count_single_author(text: str) -> int:
    """Independent oracle over the raw document."""
    return sum(1 for m in PAPER_LINE_RE.finditer(text) if ',' not in m.group(3))


def counting_fixture(rng: random.Random, n_records: int, n_single: int,
                     total_tokens: int = 4000) -> Fixture:
    """
    A paper list of n_records entries, n_single of them with one author.

    Entries are separated by at least 110 filler tokens, so a 1024-token
    chunk never holds more than ten of them.
    """
    if not 0 <= n_single <= n_records:
        raise ValueError("need 0 <= n_single <= n_records")
    single = set(rng.sample(range(n_records), n_single))
    lines = []
    for i in range(n_records):
        title = ' '.join(rng.sample(TITLE_WORDS, 3))
        n_authors = 1 if i in single else rng.randint(2, 4)
        authors = ', '.join(rng.sample(AUTHOR_NAMES, n_authors))
        lines.append(f"Paper {i + 1}: {title} | Authors: {authors}")
    text = interleave(rng, lines, total_tokens, gap_min=110)

    def count_papers(prompt: str, match) -> str:
        return f"{len(PAPER_LINE_RE.findall(prompt))} papers"

    rules = [
        (MARK_UNDERSTANDING, '3'),
        (MARK_REWRITE, COUNTING_REWRITE),
        (MARK_APPEND, sentence_picker(
            lambda s: bool(PAPER_LINE_RE.match(s)) and ',' not in s.split('| Authors:')[1])),
        (MARK_ANSWER_SELF, count_papers),
        ('', 'null'),
    ]
    task = TaskSpec(name='count-single-author', category=CATEGORY_SYNTHETIC,
                    answer_template='answer_self', query=COUNTING_QUERY,
                    description='Answer the question based on the list of papers.')
    return Fixture(task=task, doc=ContextDocument(text), answers=[f"{n_single} papers"], rules=rules)


# ----------------------------------------------------------------------
# Planted names
# ----------------------------------------------------------------------

def planted_names_fixture(rng: random.Random, total_tokens: int = 122_000,
                          missed: Sequence[str] = ()) -> Fixture:
    """
    Four names planted across a long text.

    The scripted extractor skips sentences naming anyone in `missed`.
    """
    planted = [f"{name} was seen near the old mill." for name in PLANTED_NAMES]
    text = interleave(rng, planted, total_tokens, positions=PLANTED_POSITIONS)

    def keep(sentence: str) -> bool:
        return any(name in sentence for name in PLANTED_NAMES if name not in missed)

    def list_names(prompt: str, match) -> str:
        found = [name for name in PLANTED_NAMES if name in prompt]
        return ', '.join(found) if found else 'nobody'

    rules = [
        (MARK_UNDERSTANDING, '3'),
        (MARK_APPEND, sentence_picker(keep)),
        (MARK_ANSWER_SELF, list_names),
        ('', 'null'),
    ]
    task = TaskSpec(name='planted-names', category=CATEGORY_QA, answer_template='answer_self',
                    query=NAMES_QUERY, description='List everyone the text mentions near the mill.')
    return Fixture(task=task, doc=ContextDocument(text), answers=[', '.join(PLANTED_NAMES)],
                   rules=rules)


# ----------------------------------------------------------------------
# Planted answer (single-hop QA)
# ----------------------------------------------------------------------

def planted_answer_fixture(rng: random.Random, option: str = '1', total_tokens: int = 15_000,
                           position: float = 0.8) -> Fixture:
    """One sentence in one chunk answers the query; everything else is filler."""
    text = interleave(rng, [SECRET_SENTENCE], total_tokens, positions=[position])
    rules = [
        (MARK_UNDERSTANDING, option),
        Rule.pattern(r'(?s)Read the following text and answer briefly\..*secret code word is (\w+)', '{1}'),
        (MARK_SCAN, 'null'),
        (MARK_APPEND, sentence_picker(lambda s: 'secret code word' in s)),
        Rule.pattern(r'(?s)Read the following information carefully.*secret code word is (\w+)', '{1}'),
        ('', 'null'),
    ]
    task = TaskSpec(name='planted-answer', category=CATEGORY_QA, answer_template='answer_self',
                    query=SECRET_QUERY, description='Answer the question from the text.')
    return Fixture(task=task, doc=ContextDocument(text), answers=[SECRET_ANSWER], rules=rules)


# ----------------------------------------------------------------------
# Summarization
# ----------------------------------------------------------------------

def summary_fixture(rng: random.Random, total_tokens: int = 12_000) -> Fixture:
    text = '\n\n'.join(filler_paragraphs(rng, total_tokens))
    rules = [
        (MARK_UNDERSTANDING, '2'),
        (MARK_MERGE, 'The report covers one more topic.'),
        (MARK_GOV_REPORT, 'A summary of every topic in the report.'),
        ('', 'null'),
    ]
    task = TaskSpec(name='report-summary', category=CATEGORY_SUMMARIZATION,
                    answer_template='answer_gov_report',
                    description='Write a one-page summary of the report.')
    return Fixture(task=task, doc=ContextDocument(text),
                   answers=['A summary of every topic in the report.'], rules=rules)


# ----------------------------------------------------------------------
# Fuzz corpus
# ----------------------------------------------------------------------

FUZZ_SYMBOLS = ('{', '}', '(', ')', '_', '=', ';', '->', '#', '"', '…', '€')
FUZZ_WORDS = FILLER_WORDS + ('naïve', 'café', 'straße', '東京', 'данные', 'x1', 'v2_beta')


def _fuzz_block(rng: random.Random) -> str:
    kind = rng.random()
    if kind < 0.45:
        return filler_paragraph(rng, rng.randint(20, 400))
    if kind < 0.65:
        # code: many short lines
        lines = []
        for _ in range(rng.randint(3, 60)):
            indent = ' ' * (4 * rng.randint(0, 3))
            body = ' '.join(rng.choice(FUZZ_WORDS + FUZZ_SYMBOLS) for _ in range(rng.randint(1, 12)))
            lines.append(indent + body)
        return '\n'.join(lines)
    if kind < 0.85:
        # dense one-word sentences inflate sentence annotation
        return ' '.join(f"{rng.choice(FUZZ_WORDS)}." for _ in range(rng.randint(10, 600)))
    # no whitespace at all: forces hard splits
    return '-'.join(rng.choice(FUZZ_WORDS) for _ in range(rng.randint(50, 3000)))


@lru_cache(maxsize=None)
def fuzz_corpus(seed: int = 7, total_tokens: int = 200_000) -> Tuple[str, Tuple[Tuple[int, int], ...]]:
    """A long mixed corpus and its token spans, built once per seed."""
    rng = random.Random(seed)
    blocks = []
    count = 0
    while count < total_tokens:
        block = _fuzz_block(rng)
        blocks.append(block)
        count += len(token_spans(block))
    text = '\n\n'.join(blocks)
    return text, tuple(token_spans(text))


def corpus_slice(start_token: int, n_tokens: int, seed: int = 7) -> ContextDocument:
    """n_tokens consecutive tokens of the fuzz corpus (original characters kept)."""
    text, spans = fuzz_corpus(seed)
    start_token = min(start_token, max(0, len(spans) - n_tokens))
    end_token = min(len(spans), start_token + n_tokens)
    if end_token <= start_token:
        return ContextDocument('')
    return ContextDocument(text[spans[start_token][0]:spans[end_token - 1][1]])
