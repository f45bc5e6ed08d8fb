#!/usr/bin/env python3
"""
End-to-end properties over synthetic corpora.

- counting: option 3 reproduces a brute-force count on the raw text
- planted names: F1 1.0 with a perfect extractor, lower with every miss
- window fuzz: randomized budgets and documents never overflow the window
- token ratios: retrieval beats scanning; merging costs more than brute force
- replay: a recorded run replays byte-identically; tampering is caught
"""

import json
import math
import random

import pytest

from lcboost.config import BASELINE_NAMES, ReplayConfig, RunConfig
from lcboost.constants import DEFAULT_WINDOW, TASK_CATEGORIES
from lcboost.gateway import CacheMiss, StoreCorrupt, create_gateway, script_mock
from lcboost.gateway.replay import verify_store
from lcboost.metrics import qa_f1
from lcboost.utils import canonical_json
from lcboost.engine import Action, LCBoostEngine, RunError, TaskSpec, run_baseline
from lcboost.engine.fixtures import (
    ANNOTATED_SENTENCE_RE,
    COUNTING_CONFIG,
    MARK_APPEND,
    MARK_CODE_SCAN,
    MARK_COMPRESS,
    MARK_MERGE,
    MARK_REWRITE,
    MARK_SCAN,
    MARK_UNDERSTANDING,
    PLANTED_NAMES,
    article_of,
    corpus_slice,
    count_single_author,
    counting_fixture,
    make_engine,
    planted_answer_fixture,
    planted_names_fixture,
    summary_fixture,
)


# ----------------------------------------------------------------------
# Counting
# ----------------------------------------------------------------------

COUNTING_CASES = [(1, 0, 4_000), (1, 1, 4_000), (50, 50, 12_000), (50, 0, 200_000)]


def _counting_cases():
    rng = random.Random(2023)
    cases = list(COUNTING_CASES)
    for _ in range(8):
        n_records = rng.randint(1, 50)
        cases.append((n_records, rng.randint(0, n_records), rng.choice([4_000, 30_000, 90_000, 200_000])))
    return cases


@pytest.mark.parametrize('n_records, n_single, total_tokens', _counting_cases())
def test_counting_matches_raw_text(n_records, n_single, total_tokens):
    fixture = counting_fixture(random.Random(n_records * 1000 + n_single), n_records, n_single,
                               total_tokens=total_tokens)
    assert count_single_author(fixture.doc.text) == n_single

    engine, _ = make_engine(fixture.rules, COUNTING_CONFIG)
    record = engine.run(fixture.task, fixture.doc)

    assert record.text == f"{n_single} papers"
    assert record.plan.option == 3
    actions = record.trajectory.actions()
    assert actions[0] == Action.TASK_UNDERSTANDING
    assert actions[-1] == Action.AGGREGATION
    assert set(actions[1:-1]) <= {Action.APPEND, Action.MOVE}
    assert 'compress' not in {e['role'] for e in record.ledger['entries']}


# ----------------------------------------------------------------------
# Planted names
# ----------------------------------------------------------------------

# Middle names go first
MISS_ORDER = ('Grace Hopper', 'Alan Turing', 'Ada Lovelace', 'Edsger Dijkstra')


def test_planted_names_degrade_with_misses():
    scores = []
    for n_missed in range(len(MISS_ORDER) + 1):
        missed = MISS_ORDER[:n_missed]
        fixture = planted_names_fixture(random.Random(11), missed=missed)
        engine, _ = make_engine(fixture.rules)
        record = engine.run(fixture.task, fixture.doc)
        scores.append(qa_f1(record.text, fixture.answers))
        assert record.trajectory.actions().count(Action.APPEND) == len(PLANTED_NAMES) - n_missed

    assert scores[0] == 1.0
    assert all(a > b for a, b in zip(scores, scores[1:]))
    assert scores[-1] == 0.0


# ----------------------------------------------------------------------
# Window fuzz
# ----------------------------------------------------------------------

FUZZ_RUNS = 1000
FUZZ_LONG_RUNS = 50
MAX_FUZZ_CHUNKS = 48

FUZZ_ANSWER_TEMPLATES = {
    'qa': 'answer_narrativeqa',
    'summarization': 'answer_gov_report',
    'fewshot': 'answer_samsum',
    'synthetic': 'answer_passage_count',
    'code': 'answer_lcc',
}


def _log_uniform(rng: random.Random, low: int, high: int) -> int:
    return int(round(math.exp(rng.uniform(math.log(low), math.log(high)))))


def fuzz_config(rng: random.Random, n_tokens: int) -> RunConfig:
    out = rng.randint(16, 256)
    query = rng.randint(8, 128)
    reserve = out + query + rng.randint(700, 1000)
    chunk_max = DEFAULT_WINDOW - reserve - 64
    # keep the chunk count bounded so long documents stay fast
    chunk_min = min(chunk_max, max(16, math.ceil(n_tokens / MAX_FUZZ_CHUNKS)))
    chunk = rng.randint(chunk_min, chunk_max)
    evidence = rng.randint(16, DEFAULT_WINDOW - reserve - chunk)
    return RunConfig(window=DEFAULT_WINDOW, max_output_tokens=out, query_budget=query,
                     prompt_reserve=reserve, chunk_budget=chunk, evidence_budget=evidence,
                     top_k=rng.randint(1, 5), seed=rng.randint(0, 10_000)).validate()


def fuzz_rules(rng: random.Random):
    filler = ' '.join(rng.choice(('river', 'stone', 'copper', 'lantern')) for _ in range(400))

    def pick(prompt, match):
        ids = [m.group(1) for m in ANNOTATED_SENTENCE_RE.finditer(article_of(prompt))]
        if not ids or rng.random() < 0.4:
            return 'null'
        return ', '.join(rng.sample(ids, min(len(ids), rng.randint(1, 12))))

    def maybe(text):
        return lambda prompt, match: text if rng.random() < 0.1 else 'null'

    return [
        (MARK_UNDERSTANDING, rng.choice(['1', '2', '3', '4', 'banana'])),
        (MARK_REWRITE, rng.choice(['null', filler])),
        (MARK_APPEND, pick),
        (MARK_MERGE, lambda prompt, match: 'null' if rng.random() < 0.2 else filler),
        (MARK_COMPRESS, filler),
        (MARK_SCAN, maybe('found it')),
        (MARK_CODE_SCAN, maybe('return value')),
        ('', filler),
    ]


def fuzz_task(rng: random.Random) -> TaskSpec:
    category = rng.choice(TASK_CATEGORIES)
    query = None
    if category != 'summarization' and rng.random() < 0.8:
        query = ' '.join(rng.choice(('who', 'river', 'stone', 'count', 'where')) for _ in range(rng.randint(1, 300)))
    return TaskSpec(name=f"fuzz-{category}", category=category,
                    answer_template=FUZZ_ANSWER_TEMPLATES[category], query=query,
                    description='Describe the document. ' * rng.randint(1, 60))


def test_window_never_overflows():
    rng = random.Random(4096)
    for run_no in range(FUZZ_RUNS):
        if run_no < FUZZ_RUNS - FUZZ_LONG_RUNS:
            n_tokens = _log_uniform(rng, 10, 20_000)
        else:
            n_tokens = rng.randint(20_000, 200_000)
        doc = corpus_slice(rng.randint(0, 200_000), n_tokens)
        config = fuzz_config(rng, n_tokens)
        task = fuzz_task(rng)
        engine, _ = make_engine(fuzz_rules(rng), config)
        strategy = rng.choice(('lcboost',) + BASELINE_NAMES)

        if strategy == 'lcboost':
            record = engine.run(task, doc)
        else:
            record = run_baseline(engine, strategy, task, doc)

        assert record.trajectory.terminal is not None
        for entry in record.ledger['entries']:
            assert entry['prompt_tokens'] + config.max_output_tokens <= DEFAULT_WINDOW, (
                f"run {run_no} ({strategy}, {n_tokens} tokens): {entry}")


# ----------------------------------------------------------------------
# Token ratios
# ----------------------------------------------------------------------

def test_retrieval_cheaper_than_scanning():
    retrieve = planted_answer_fixture(random.Random(8), option='1')
    scan = planted_answer_fixture(random.Random(8), option='4')
    engine, _ = make_engine(retrieve.rules)
    retrieved = engine.run(retrieve.task, retrieve.doc)
    engine, _ = make_engine(scan.rules)
    scanned = engine.run(scan.task, scan.doc)

    assert len(scanned.trajectory.visit_order) >= 4
    assert retrieved.text == scanned.text == 'zephyr'
    assert retrieved.ledger['total_tokens'] / scanned.ledger['total_tokens'] < 0.5


def test_merging_costs_more_than_brute_force():
    fixture = summary_fixture(random.Random(9))
    engine, _ = make_engine(fixture.rules)
    merged = engine.run(fixture.task, fixture.doc)
    engine, _ = make_engine(fixture.rules)
    brute = run_baseline(engine, 'brute_force', fixture.task, fixture.doc)

    assert merged.plan.option == 2
    assert merged.terminal == Action.AGGREGATION
    assert merged.ledger['total_tokens'] / brute.ledger['total_tokens'] > 1.0


# ----------------------------------------------------------------------
# Replay
# ----------------------------------------------------------------------

def _replay_engine(store_path, mode, inner=None):
    config = RunConfig(backend='replay',
                       replay=ReplayConfig(mode=mode, record_from='mock', backend_name='mock'))
    return LCBoostEngine(create_gateway(config, store_path=store_path, inner=inner), config)


def test_replay_is_byte_identical(tmp_path):
    fixture = counting_fixture(random.Random(1), 12, 4)
    store = tmp_path / 'replay' / 'count.jsonl'

    recorded = _replay_engine(store, 'record', inner=script_mock(fixture.rules)).run(fixture.task, fixture.doc)
    replayed = _replay_engine(store, 'replay').run(fixture.task, fixture.doc)

    assert canonical_json(recorded.to_dict()) == canonical_json(replayed.to_dict())
    assert verify_store(store) == []


def test_replay_detects_changes(tmp_path):
    fixture = counting_fixture(random.Random(1), 12, 4)
    store = tmp_path / 'count.jsonl'
    _replay_engine(store, 'record', inner=script_mock(fixture.rules)).run(fixture.task, fixture.doc)

    # A different prompt has nothing stored
    changed = TaskSpec(name=fixture.task.name, category=fixture.task.category,
                       answer_template=fixture.task.answer_template,
                       query=fixture.task.query + ' Include workshops.',
                       description=fixture.task.description)
    with pytest.raises(RunError) as excinfo:
        _replay_engine(store, 'replay').run(changed, fixture.doc)
    assert isinstance(excinfo.value.__cause__, CacheMiss)

    # Tampering with one cached prompt byte breaks the stored hash
    lines = store.read_text(encoding='utf-8').splitlines()
    record = json.loads(lines[1])
    prompt = record['request']['prompt']
    record['request']['prompt'] = ('X' if prompt[0] != 'X' else 'Y') + prompt[1:]
    lines[1] = json.dumps(record, ensure_ascii=False, sort_keys=True)
    store.write_text('\n'.join(lines) + '\n', encoding='utf-8')

    problems = verify_store(store)
    assert len(problems) == 1
    assert ':2:' in problems[0]
    with pytest.raises(StoreCorrupt):
        _replay_engine(store, 'replay')
