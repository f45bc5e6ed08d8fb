#!/usr/bin/env python3
"""
Tests for the command-line entry point.
"""

import json
import logging
import random

import pytest
import yaml

from lcboost.pipeline import main
from lcboost.engine.fixtures import SECRET_ANSWER, SECRET_QUERY, planted_answer_fixture

# Option 1: retrieve, scan, answer at the first chunk naming the code word
RULES = {
    'name': 'mock',
    'rules': [
        {'literal': 'select one of the options by only outputting', 'template': '1'},
        {'pattern': r'(?s)Read the following text and answer briefly\..*secret code word is (\w+)',
         'template': '{1}'},
        {'literal': 'If no answer can be found in the text', 'template': 'null'},
        {'pattern': r'(?s)Read the following information carefully.*secret code word is (\w+)',
         'template': '{1}'},
        {'literal': '', 'template': 'null'},
    ],
}


@pytest.fixture(autouse=True)
def reset_logging():
    yield
    root = logging.getLogger()
    for handler in list(root.handlers):
        if getattr(handler, '_lcboost', False):
            root.removeHandler(handler)
    root.setLevel(logging.WARNING)


@pytest.fixture
def workspace(tmp_path):
    rng = random.Random(21)
    with open(tmp_path / 'fixtures.jsonl', 'w', encoding='utf-8') as f:
        for i in range(2):
            fixture = planted_answer_fixture(rng, total_tokens=9_000)
            f.write(json.dumps({'_id': f"secret-{i}", 'dataset': 'self', 'input': SECRET_QUERY,
                                'context': fixture.doc.text, 'answers': [SECRET_ANSWER]}) + '\n')
    (tmp_path / 'rules.yaml').write_text(yaml.safe_dump(RULES), encoding='utf-8')
    return tmp_path


def engine_args(ws, *extra):
    return ['--data', str(ws / 'fixtures.jsonl'), '--mock-rules', str(ws / 'rules.yaml'),
            '--output-dir', str(ws / 'runs'), '--no-progress', *extra]


def test_run_mock_prints_report(workspace, capsys):
    assert main(['run', *engine_args(workspace)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report['strategy'] == 'lcboost'
    assert report['aggregates'] == {'self': {'accuracy': 1.0, 'qa_f1': 1.0}}
    assert (workspace / 'runs' / 'lcboost' / 'report.json').exists()
    assert (workspace / 'runs' / 'lcboost' / 'traces' / 'secret-0.json').exists()


def test_run_record_then_replay(workspace, capsys):
    store = str(workspace / 'store')
    assert main(['run', *engine_args(workspace, '--backend', 'replay', '--replay-mode', 'record',
                                     '--record-from', 'mock', '--store-dir', store)]) == 0
    recorded = capsys.readouterr().out

    replay_args = ['run', '--strategy', 'lcboost', '--backend', 'replay', '--store-dir', store,
                   '--replay-backend', 'mock', '--data', str(workspace / 'fixtures.jsonl'),
                   '--no-write', '--no-progress']
    assert main(replay_args) == 0
    first = capsys.readouterr().out
    assert main(replay_args + ['--concurrency', '2']) == 0
    second = capsys.readouterr().out
    assert recorded == first == second

    assert main(['cache', 'verify', store]) == 0
    verified = json.loads(capsys.readouterr().out)
    assert verified == {'stores': 2, 'problems': {}}


def test_ablate_prints_two_row_table(workspace, capsys):
    code = main(['ablate', '--strategies', 'retrieve_only,append_only', *engine_args(workspace)])
    assert code == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 4
    assert lines[0].startswith('strategy')
    assert lines[2].startswith('retrieve_only') and lines[3].startswith('append_only')
    comparison = json.loads((workspace / 'runs' / 'ablation' / 'comparison.json').read_text())
    assert [row['strategy'] for row in comparison] == ['retrieve_only', 'append_only']
    assert comparison[0]['self/accuracy'] == 1.0


def test_score_predictions(tmp_path, capsys):
    path = tmp_path / 'predictions.jsonl'
    rows = [{'id': 'a', 'dataset': 'narrativeqa', 'answers': ['the red fox'], 'prediction': 'red fox'},
            {'id': 'b', 'dataset': 'narrativeqa', 'answers': ['a blue bird'], 'prediction': 'green'}]
    path.write_text('\n'.join(json.dumps(r) for r in rows) + '\n', encoding='utf-8')
    assert main(['score', '--predictions', str(path), '--scores-csv', str(tmp_path / 's.csv')]) == 0
    result = json.loads(capsys.readouterr().out)
    assert result['aggregates'] == {'narrativeqa': {'qa_f1': 0.5}}
    assert (tmp_path / 's.csv').exists()


def test_energy_report(tmp_path, capsys):
    csv_path = tmp_path / 'energy.csv'
    assert main(['energy-report', '--points', '3', '--csv', str(csv_path)]) == 0
    output = json.loads(capsys.readouterr().out)
    assert csv_path.exists()
    assert len(output['rows']) == 6
    assert output['energy_ratio']['4096'] == 1.0
    assert 3.2 < output['energy_ratio']['131072'] < 3.4


def test_energy_report_token_ratios(tmp_path, capsys):
    def report(path, tokens):
        results = [{'id': rid, 'prompt_tokens': p, 'response_tokens': r} for rid, (p, r) in tokens.items()]
        path.write_text(json.dumps({'results': results}), encoding='utf-8')
        return str(path)

    run = report(tmp_path / 'run.json', {'a': (100, 0), 'b': (50, 50)})
    base = report(tmp_path / 'base.json', {'a': (400, 0), 'b': (100, 100)})
    assert main(['energy-report', '--points', '2', '--csv', str(tmp_path / 'e.csv'),
                 '--report', run, '--baseline-report', base]) == 0
    output = json.loads(capsys.readouterr().out)
    assert [r['ratio'] for r in output['token_ratios']] == [0.25, 0.5]
    assert output['mean_token_ratio'] == 0.375


def test_cache_detects_tampering(workspace, capsys):
    store = workspace / 'store'
    assert main(['run', *engine_args(workspace, '--backend', 'replay', '--replay-mode', 'record',
                                     '--record-from', 'mock', '--store-dir', str(store),
                                     '--no-write')]) == 0
    capsys.readouterr()

    path = store / 'secret-0.jsonl'
    lines = path.read_text(encoding='utf-8').splitlines()
    record = json.loads(lines[0])
    record['request']['prompt'] += ' '
    lines[0] = json.dumps(record, sort_keys=True)
    path.write_text('\n'.join(lines) + '\n', encoding='utf-8')

    assert main(['cache', 'verify', str(path)]) == 1
    problems = json.loads(capsys.readouterr().out)['problems']
    assert list(problems) == [str(path)]

    assert main(['cache', 'compact', str(path)]) == 0
    assert json.loads(capsys.readouterr().out)[str(path)]['dropped_corrupt'] == 1
    assert main(['cache', 'verify', str(path)]) == 0


def test_unknown_flag_exits_2(capsys):
    with pytest.raises(SystemExit) as info:
        main(['run', '--data', 'x.jsonl', '--frobnicate'])
    assert info.value.code == 2
    assert 'usage' in capsys.readouterr().err


def test_bad_budget_is_usage_error(workspace, capsys):
    assert main(['run', *engine_args(workspace, '--chunk-budget', '4000')]) == 2
    assert 'exceeds window' in capsys.readouterr().err


def test_missing_data_file_fails(tmp_path):
    assert main(['run', '--data', str(tmp_path / 'missing.jsonl'), '--no-progress']) == 1


def test_malformed_data_strict_and_lenient(tmp_path, capsys):
    path = tmp_path / 'data.jsonl'
    path.write_text('{"_id": "a", "dataset": "self", "context": "text", "answers": ["x"]}\n{broken\n',
                    encoding='utf-8')
    args = ['run', '--data', str(path), '--no-write', '--no-progress']
    assert main(args) == 1
    capsys.readouterr()
    assert main(args + ['--lenient']) == 0
    report = json.loads(capsys.readouterr().out)
    assert report['totals']['records'] == 1
