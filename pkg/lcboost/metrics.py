#!/usr/bin/env python3
"""
Answer scoring for the benchmark suite.

Metrics:
- qa_f1: token-multiset F1 over normalized answers
- rouge_l: LCS F-measure (summarization)
- edit_similarity: normalized Levenshtein similarity (code completion)
- exact_accuracy: normalized match with a first-integer fallback (counting)

Every metric scores a prediction against a list of references and keeps the
best reference. Datasets name their metric through METRICS.

Usage:
    score = qa_f1('Colin Creevey, Mrs Norris', ['Colin Creevey, Hermione Granger'])
    scored = score_example('edit_sim', prediction, [reference])
"""

import re
import string
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from rouge_score import rouge_scorer, tokenizers

ARTICLES_RE = re.compile(r'\b(a|an|the)\b')
INTEGER_RE = re.compile(r'-?\d+')
PUNCTUATION = set(string.punctuation)


def _strip_punctuation(text: str) -> str:
    return ''.join(ch for ch in text.lower() if ch not in PUNCTUATION)


def normalize(text: str) -> str:
    """Lowercase, drop punctuation and English articles, collapse whitespace."""
    text = ARTICLES_RE.sub(' ', _strip_punctuation(text))
    return ' '.join(text.split())


class RougeTokenizer(tokenizers.Tokenizer):
    """
    Lowercase, punctuation-free whitespace tokens with articles kept.

    rouge_score's default tokenizer keeps only [a-z0-9], which would turn
    any non-Latin text into an empty token list.
    """

    def tokenize(self, text: str) -> List[str]:
        return _strip_punctuation(text).split()


_ROUGE_TOKENIZER = RougeTokenizer()
_ROUGE = rouge_scorer.RougeScorer(['rougeL'], tokenizer=_ROUGE_TOKENIZER)


def _require_refs(refs: Sequence[str]) -> None:
    if not refs:
        raise ValueError("at least one reference is required")


def _f1_pair(pred: str, ref: str) -> float:
    pred_tokens = normalize(pred).split()
    ref_tokens = normalize(ref).split()
    if not pred_tokens and not ref_tokens:
        return 1.0
    common = Counter(pred_tokens) & Counter(ref_tokens)
    overlap = sum(common.values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(pred_tokens)
    recall = overlap / len(ref_tokens)
    return 2 * precision * recall / (precision + recall)


def qa_f1(pred: str, refs: Sequence[str]) -> float:
    """
    Token F1 between prediction and the best-matching reference.

    Args:
        pred: Model answer
        refs: Non-empty list of gold answers

    Returns:
        Score in [0, 1]; 1.0 when both sides normalize to nothing
    """
    _require_refs(refs)
    return max(_f1_pair(pred, ref) for ref in refs)


def _rouge_pair(pred: str, ref: str) -> float:
    if not _ROUGE_TOKENIZER.tokenize(pred) and not _ROUGE_TOKENIZER.tokenize(ref):
        return 1.0
    return _ROUGE.score(ref, pred)['rougeL'].fmeasure


def rouge_l(pred: str, refs: Sequence[str]) -> float:
    """Rouge-L F-measure (beta 1), max over references."""
    _require_refs(refs)
    return max(_rouge_pair(pred, ref) for ref in refs)


def levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(min(previous[j] + 1,
                               current[j - 1] + 1,
                               previous[j - 1] + (ca != cb)))
        previous = current
    return previous[-1]


def edit_similarity(pred: str, ref: str) -> float:
    """1 - Levenshtein(pred, ref) / max length; two empty strings score 1.0."""
    longest = max(len(pred), len(ref))
    if longest == 0:
        return 1.0
    return 1.0 - levenshtein(pred, ref) / longest


def first_code_line(text: str) -> str:
    """First line that is neither blank, a comment nor a code fence."""
    for line in text.lstrip('\n').split('\n'):
        stripped = line.strip()
        if stripped and not stripped.startswith(('#', '//', '`')):
            return line
    return ''


def code_edit_similarity(pred: str, refs: Sequence[str]) -> float:
    """Edit similarity of the first code line, max over references."""
    _require_refs(refs)
    line = first_code_line(pred)
    return max(edit_similarity(line, ref) for ref in refs)


def _first_integer(text: str) -> Optional[int]:
    match = INTEGER_RE.search(text)
    return int(match.group()) if match else None


def exact_accuracy(pred: str, refs: Sequence[str]) -> float:
    """
    1.0 if the normalized prediction equals a normalized reference, or the
    first integer of the prediction equals the first integer of a numeric
    reference; 0.0 otherwise.
    """
    _require_refs(refs)
    norm_pred = normalize(pred)
    pred_int = _first_integer(pred)
    for ref in refs:
        if norm_pred == normalize(ref):
            return 1.0
        ref_int = _first_integer(ref)
        if ref_int is not None and pred_int is not None and ref_int == pred_int:
            return 1.0
    return 0.0


METRICS: Dict[str, Callable[[str, Sequence[str]], float]] = {
    'qa_f1': qa_f1,
    'rouge_l': rouge_l,
    'accuracy': exact_accuracy,
    'edit_sim': code_edit_similarity,
}


def get_metric(name: str) -> Callable[[str, Sequence[str]], float]:
    if name not in METRICS:
        raise ValueError(f"Unknown metric: {name}. Choose from: {', '.join(METRICS)}")
    return METRICS[name]


@dataclass(frozen=True)
class ScoredExample:
    """A prediction scored against its references with one metric."""
    record_id: str
    metric: str
    prediction: str
    references: List[str]
    score: float
    dataset: str = ''

    def to_dict(self) -> Dict:
        return {'id': self.record_id, 'dataset': self.dataset, 'metric': self.metric,
                'score': round(self.score, 6), 'prediction': self.prediction,
                'references': list(self.references)}


def score_example(metric: str, prediction: str, references: Sequence[str],
                  record_id: str = '', dataset: str = '') -> ScoredExample:
    score = get_metric(metric)(prediction, references)
    return ScoredExample(record_id=record_id, metric=metric, prediction=prediction,
                         references=list(references), score=score, dataset=dataset)


def mean_score(examples: Sequence[ScoredExample]) -> Optional[float]:
    """Mean score, or None when there is nothing to average."""
    if not examples:
        return None
    return float(np.mean([e.score for e in examples]))
