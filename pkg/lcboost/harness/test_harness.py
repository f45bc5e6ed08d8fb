#!/usr/bin/env python3
"""
Tests for dataset ingestion and the suite runner.
"""

import csv
import json
import random

import pytest

from lcboost.config import ReplayConfig
from lcboost.gateway import Backend, BackendUnavailable, InvalidRuleSet, TransportError, script_mock
from lcboost.engine.fixtures import COUNTING_CONFIG, COUNTING_QUERY, MARK_ANSWER_SELF, counting_fixture
from lcboost.prompts import default_registry
from lcboost.harness.ingest import (
    DatasetRecord,
    IngestError,
    ingest,
    load_dataset_manifest,
)
from lcboost.harness.suite import (
    RecordStatus,
    ablate,
    comparison_rows,
    format_table,
    report_hash,
    rescore,
    run_suite,
    write_report,
)


def write_lines(path, rows):
    with open(path, 'w', encoding='utf-8') as f:
        for row in rows:
            f.write((row if isinstance(row, str) else json.dumps(row)) + '\n')
    return path


def record_row(record_id, **fields):
    row = {'_id': record_id, 'dataset': 'narrativeqa', 'input': 'Who left?',
           'context': 'Tom left the house early.', 'answers': ['Tom'], 'length': 5}
    row.update(fields)
    return row


# ----------------------------------------------------------------------
# Ingestion
# ----------------------------------------------------------------------

def test_ingest_valid_file(tmp_path):
    path = write_lines(tmp_path / 'data.jsonl',
                       [record_row('a'), '', record_row('b', source='web'), record_row(3)])
    records = ingest(path)
    assert [r.id for r in records] == ['a', 'b', '3']
    assert records[0].query == 'Who left?'
    assert records[1].extras == {'source': 'web'}
    assert records[0].extras == {}


def test_ingest_missing_answers_strict(tmp_path):
    bad = record_row('b')
    del bad['answers']
    path = write_lines(tmp_path / 'data.jsonl', [record_row('a'), bad, record_row('c')])
    with pytest.raises(IngestError) as info:
        ingest(path)
    assert info.value.line_no == 2
    assert 'answers' in str(info.value)
    assert str(info.value).startswith('line 2: ')


def test_ingest_lenient_skips_bad_lines(tmp_path):
    path = write_lines(tmp_path / 'data.jsonl',
                       [record_row('a'), '{not json', record_row('c', answers=[]),
                        record_row('d', context='   '), record_row('e')])
    records = ingest(path, strict=False)
    assert [r.id for r in records] == ['a', 'e']


def test_ingest_duplicate_ids(tmp_path):
    path = write_lines(tmp_path / 'data.jsonl', [record_row('a'), record_row('a')])
    with pytest.raises(IngestError, match='duplicate id'):
        ingest(path)
    assert len(ingest(path, strict=False)) == 1


def test_ingest_dataset_default(tmp_path):
    row = record_row('a')
    del row['dataset']
    path = write_lines(tmp_path / 'data.jsonl', [row])
    with pytest.raises(IngestError):
        ingest(path)
    assert ingest(path, dataset='qasper')[0].dataset == 'qasper'


def test_self_style_record():
    record = DatasetRecord.model_validate({
        'id': 'acl/2023 #1', 'dataset': 'self', 'input': COUNTING_QUERY,
        'context': 'Paper 1: Sparse Graphs | Authors: Mara Quint', 'answers': ['1 papers']})
    spec = load_dataset_manifest()['self']
    task = spec.task_for(record)
    assert task.category == 'synthetic'
    assert task.query == COUNTING_QUERY
    assert spec.metrics == ('qa_f1', 'accuracy')
    assert record.safe_id == 'acl_2023__1'


def test_blank_query_is_none():
    record = DatasetRecord(id='x', dataset='gov_report', input='  ', context='text', answers=['s'])
    assert record.query is None


# ----------------------------------------------------------------------
# Manifest
# ----------------------------------------------------------------------

def test_packaged_manifest():
    specs = load_dataset_manifest()
    assert len(specs) == 12
    assert specs['gov_report'].primary_metric == 'rouge_l'
    assert specs['lcc'].category == 'code'
    registry = default_registry()
    for spec in specs.values():
        assert spec.answer_template in registry.names()


@pytest.mark.parametrize('entry, message', [
    ({'category': 'qa', 'metrics': ['bleu'], 'answer_template': 'answer_self'}, 'metrics'),
    ({'category': 'poetry', 'metrics': ['qa_f1'], 'answer_template': 'answer_self'}, 'category'),
    ({'category': 'qa', 'metrics': ['qa_f1']}, 'answer_template'),
    ({'category': 'qa', 'metrics': ['qa_f1'], 'answer_template': 'answer_self', 'weight': 2}, 'unknown keys'),
])
def test_manifest_rejects_bad_entries(tmp_path, entry, message):
    import yaml
    path = tmp_path / 'datasets.yaml'
    path.write_text(yaml.safe_dump({'custom': entry}), encoding='utf-8')
    with pytest.raises(IngestError, match=message):
        load_dataset_manifest(path)


# ----------------------------------------------------------------------
# Suites
# ----------------------------------------------------------------------

def counting_suite(n=5, seed=11):
    """Counting records and per-record oracle rules."""
    rng = random.Random(seed)
    records, rules = [], {}
    for i in range(n):
        n_records = rng.randint(1, 12)
        fixture = counting_fixture(rng, n_records, rng.randint(0, n_records))
        record_id = f"count-{i:02d}"
        records.append(DatasetRecord(id=record_id, dataset='self', input=COUNTING_QUERY,
                                     context=fixture.doc.text, answers=fixture.answers))
        rules[record_id] = fixture.rules
    return records, rules


def oracle_factory(rules):
    return lambda record: script_mock(rules[record.id])


class BrokenBackend(Backend):
    name = 'broken'

    def __init__(self, error):
        self.error = error

    def generate(self, request):
        raise self.error


def test_empty_suite_is_undefined():
    report = run_suite([], COUNTING_CONFIG, progress=False)
    assert report.undefined
    assert report.aggregates() == {}
    assert report.to_dict()['totals']['records'] == 0


def test_unknown_dataset_rejected():
    record = DatasetRecord(id='x', dataset='trivia', input='q', context='text', answers=['a'])
    with pytest.raises(IngestError, match='trivia'):
        run_suite([record], COUNTING_CONFIG, progress=False)


def test_counting_suite_scores_perfectly():
    records, rules = counting_suite()
    report = run_suite(records, COUNTING_CONFIG, backend_factory=oracle_factory(rules), progress=False)
    assert not report.undefined
    assert [r.record_id for r in report.results] == sorted(r.id for r in records)
    assert all(r.status == RecordStatus.COMPLETED for r in report.results)
    assert report.aggregates() == {'self': {'accuracy': 1.0, 'qa_f1': 1.0}}
    totals = report.totals()
    assert totals['records'] == 5 and totals['failed'] == 0
    assert totals['calls'] == sum(r.ledger['calls'] for r in report.results)


def test_aggregate_is_mean_of_records():
    records, rules = counting_suite(n=4, seed=5)
    # one record scripted to answer wrong
    rules[records[0].id] = [(MARK_ANSWER_SELF, 'no papers')] + list(rules[records[0].id])
    report = run_suite(records, COUNTING_CONFIG, backend_factory=oracle_factory(rules), progress=False)
    for metric in ('qa_f1', 'accuracy'):
        scores = [r.scores[metric] for r in report.results]
        assert report.aggregates()['self'][metric] == pytest.approx(sum(scores) / len(scores))
    assert report.aggregates()['self']['accuracy'] == pytest.approx(0.75)


def test_concurrency_does_not_change_report():
    records, rules = counting_suite(n=6, seed=3)
    serial = run_suite(records, COUNTING_CONFIG, backend_factory=oracle_factory(rules), progress=False)
    parallel = run_suite(records, COUNTING_CONFIG.with_overrides(concurrency=4),
                         backend_factory=oracle_factory(rules), progress=False)
    assert serial.to_dict() == parallel.to_dict()
    assert report_hash(serial) == report_hash(parallel)


def test_replayed_suite_is_identical(tmp_path):
    records, rules = counting_suite(n=3, seed=9)
    store_dir = str(tmp_path / 'store')
    recording = COUNTING_CONFIG.with_overrides(
        backend='replay', replay=ReplayConfig(mode='record', store_dir=store_dir,
                                              record_from='mock', backend_name='mock'))
    recorded = run_suite(records, recording, backend_factory=oracle_factory(rules), progress=False)
    assert sorted(p.name for p in (tmp_path / 'store').iterdir()) == [f"{r.id}.jsonl" for r in records]

    replaying = recording.with_overrides(replay=ReplayConfig(mode='replay', store_dir=store_dir,
                                                             backend_name='mock'))
    first = run_suite(records, replaying, progress=False)
    second = run_suite(records, replaying.with_overrides(concurrency=3), progress=False)
    assert report_hash(first) == report_hash(recorded) == report_hash(second)


def test_replay_miss_fails_record_not_suite(tmp_path):
    records, _ = counting_suite(n=2, seed=4)
    config = COUNTING_CONFIG.with_overrides(
        backend='replay', replay=ReplayConfig(mode='replay', store_dir=str(tmp_path), backend_name='mock'))
    report = run_suite(records, config, progress=False)
    assert all(r.status == RecordStatus.FAILED for r in report.results)
    assert all('no stored response' in r.error for r in report.results)
    assert report.aggregates() == {'self': {'accuracy': 0.0, 'qa_f1': 0.0}}


def test_corrupt_store_fails_only_its_record(tmp_path):
    records, rules = counting_suite(n=3, seed=9)
    store_dir = tmp_path / 'store'
    recording = COUNTING_CONFIG.with_overrides(
        backend='replay', replay=ReplayConfig(mode='record', store_dir=str(store_dir),
                                              record_from='mock', backend_name='mock'))
    run_suite(records, recording, backend_factory=oracle_factory(rules), progress=False)
    (store_dir / f"{records[0].id}.jsonl").write_text('{not json\n', encoding='utf-8')

    replaying = recording.with_overrides(replay=ReplayConfig(mode='replay', store_dir=str(store_dir),
                                                             backend_name='mock'))
    report = run_suite(records, replaying, progress=False)
    by_id = {r.record_id: r for r in report.results}
    broken = by_id[records[0].id]
    assert broken.status == RecordStatus.FAILED
    assert broken.error.startswith('StoreCorrupt')
    assert broken.ledger == {}
    assert broken.scores == {'qa_f1': 0.0, 'accuracy': 0.0}
    assert all(by_id[r.id].status == RecordStatus.COMPLETED for r in records[1:])
    assert report.totals()['failed'] == 1


def test_bad_mock_rules_stop_suite(tmp_path):
    import yaml
    rules_path = tmp_path / 'rules.yaml'
    rules_path.write_text(yaml.safe_dump({'rules': [{'literal': 'Question', 'template': '1'}]}),
                          encoding='utf-8')
    records, _ = counting_suite(n=2, seed=4)
    with pytest.raises(InvalidRuleSet, match='catch-all'):
        run_suite(records, COUNTING_CONFIG.with_overrides(mock_rules=str(rules_path)), progress=False)


def test_failed_record_kept_in_report():
    records, rules = counting_suite(n=3, seed=8)
    broken_id = records[1].id

    def factory(record):
        if record.id == broken_id:
            return BrokenBackend(TransportError('connection reset'))
        return script_mock(rules[record.id])

    report = run_suite(records, COUNTING_CONFIG, backend_factory=factory, progress=False)
    by_id = {r.record_id: r for r in report.results}
    broken = by_id[broken_id]
    assert broken.status == RecordStatus.FAILED
    assert broken.scores == {'qa_f1': 0.0, 'accuracy': 0.0}
    assert 'connection reset' in broken.error
    assert broken.to_dict()['status'] == 'failed'
    assert report.totals()['failed'] == 1
    assert report.aggregates()['self']['accuracy'] == pytest.approx(2 / 3)


def test_unreachable_backend_stops_suite():
    records, _ = counting_suite(n=2, seed=1)
    factory = lambda record: BrokenBackend(BackendUnavailable('no API key'))
    with pytest.raises(BackendUnavailable):
        run_suite(records, COUNTING_CONFIG, backend_factory=factory, progress=False)


def test_ablation_table():
    records, rules = counting_suite(n=2, seed=6)
    reports = ablate(records, COUNTING_CONFIG, ['lcboost', 'append_only', 'brute_force'],
                     backend_factory=oracle_factory(rules), progress=False)
    assert list(reports) == ['lcboost', 'append_only', 'brute_force']
    rows = comparison_rows(reports)
    assert [row['strategy'] for row in rows] == ['lcboost', 'append_only', 'brute_force']
    assert rows[0]['self/accuracy'] == 1.0
    assert all(row['total_tokens'] > 0 for row in rows)
    table = format_table(rows).splitlines()
    assert table[0].startswith('strategy')
    assert len(table) == 2 + len(rows)
    assert format_table([]) == ''


# ----------------------------------------------------------------------
# Output and re-scoring
# ----------------------------------------------------------------------

def test_write_report_and_rescore(tmp_path):
    records, rules = counting_suite(n=3, seed=2)
    report = run_suite(records, COUNTING_CONFIG, backend_factory=oracle_factory(rules), progress=False)
    paths = write_report(report, tmp_path / 'out')

    data = json.loads(paths['report'].read_text(encoding='utf-8'))
    assert data['strategy'] == 'lcboost'
    assert 'wall_time' not in data
    assert len(data['results']) == 3
    assert sorted(p.name for p in paths['traces'].iterdir()) == [f"{r.id}.json" for r in records]
    trace = json.loads((paths['traces'] / f"{records[0].id}.json").read_text(encoding='utf-8'))
    assert trace['steps'][-1]['action'] == 'Answer'

    with open(paths['scores'], newline='', encoding='utf-8') as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 3 * 2
    assert {row['metric'] for row in rows} == {'qa_f1', 'accuracy'}

    predictions = write_lines(tmp_path / 'predictions.jsonl', data['results'])
    rescored = rescore(predictions, load_dataset_manifest())
    assert rescored['aggregates'] == {'self': {'accuracy': 1.0, 'qa_f1': 1.0}}
    assert len(rescored['examples']) == 6
    assert rescored['datasets'] == {'self': 3}
    assert {e.dataset for e in rescored['examples']} == {'self'}


def test_rescore_rejects_malformed_lines(tmp_path):
    datasets = load_dataset_manifest()
    path = write_lines(tmp_path / 'p.jsonl', [{'id': 'a', 'dataset': 'narrativeqa', 'answers': ['x']}])
    with pytest.raises(IngestError, match='prediction'):
        rescore(path, datasets)
    path = write_lines(tmp_path / 'q.jsonl', ['[1, 2]'])
    with pytest.raises(IngestError):
        rescore(path, datasets)
    path = write_lines(tmp_path / 'r.jsonl',
                       [{'id': 'a', 'dataset': 'trivia', 'answers': ['x'], 'prediction': 'x'}])
    with pytest.raises(IngestError, match='unknown dataset'):
        rescore(path, datasets)


def test_rescore_requires_ids(tmp_path):
    path = write_lines(tmp_path / 'p.jsonl',
                       [{'dataset': 'narrativeqa', 'answers': ['x'], 'prediction': 'x'}])
    with pytest.raises(IngestError, match='no id'):
        rescore(path, load_dataset_manifest())


def test_rescore_keys_records_by_dataset_and_id(tmp_path):
    datasets = load_dataset_manifest()
    path = write_lines(tmp_path / 'p.jsonl', [
        {'id': 'q1', 'dataset': 'narrativeqa', 'answers': ['red fox'], 'prediction': 'red fox'},
        {'id': 'q1', 'dataset': 'qasper', 'answers': ['blue bird'], 'prediction': 'green'},
    ])
    rescored = rescore(path, datasets)
    assert rescored['aggregates'] == {'narrativeqa': {'qa_f1': 1.0}, 'qasper': {'qa_f1': 0.0}}
    assert rescored['datasets'] == {'narrativeqa': 1, 'qasper': 1}

    path = write_lines(tmp_path / 'dup.jsonl', [
        {'id': 'q1', 'dataset': 'narrativeqa', 'answers': ['x'], 'prediction': 'x'},
        {'_id': 'q1', 'dataset': 'narrativeqa', 'answers': ['y'], 'prediction': 'y'},
    ])
    with pytest.raises(IngestError, match='duplicate id'):
        rescore(path, datasets)
