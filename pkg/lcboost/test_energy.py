#!/usr/bin/env python3
"""
Tests for the FLOPs / energy model and token ratios.
"""

import csv

import pytest

from lcboost.config import EnergyConfig
from lcboost.gateway.ledger import CostLedger
from lcboost.energy import (
    CSV_COLUMNS,
    DivisionUndefined,
    HardwareProfile,
    ModelShape,
    energy_joules,
    forward_flops,
    mean_ratio,
    plot_sweep,
    scenario_compare,
    sweep,
    sweep_from_config,
    sweep_lengths,
    token_report,
    token_reports,
    write_sweep_csv,
)

P = 6.74e9
D = 4096
L = 32
SHAPE = ModelShape(params=P, hidden=D, layers=L)
HW = HardwareProfile(peak_flops=312e12, power_watts=400.0)


def test_forward_flops_values():
    assert forward_flops(SHAPE, 1) == pytest.approx(2 * P + 2 * L * D)
    assert forward_flops(SHAPE, 4096) == pytest.approx(5.9612126511104e13)
    ratio = forward_flops(SHAPE, 2000, 'attention_only') / forward_flops(SHAPE, 1000, 'attention_only')
    assert ratio == pytest.approx(4.0)
    assert forward_flops(SHAPE, 10, 'params_only') == pytest.approx(20 * P)


def test_forward_flops_rejects_bad_input():
    with pytest.raises(ValueError):
        forward_flops(SHAPE, 0)
    with pytest.raises(ValueError, match='Unknown formula'):
        forward_flops(SHAPE, 10, 'sparse')
    with pytest.raises(ValueError):
        ModelShape(params=0, hidden=1, layers=1)


def test_forward_flops_increasing_and_convex():
    values = [forward_flops(SHAPE, t) for t in range(1, 20000, 997)]
    diffs = [b - a for a, b in zip(values, values[1:])]
    assert all(d > 0 for d in diffs)
    assert all(b > a for a, b in zip(diffs, diffs[1:]))


def test_energy_joules():
    assert energy_joules(312e12, HW) == 400.0
    assert energy_joules(0, HW) == 0.0
    double_power = HardwareProfile(peak_flops=312e12, power_watts=800.0)
    double_peak = HardwareProfile(peak_flops=624e12, power_watts=400.0)
    assert energy_joules(1e15, double_power) == pytest.approx(2 * energy_joules(1e15, HW))
    assert energy_joules(1e15, double_peak) == pytest.approx(energy_joules(1e15, HW) / 2)
    assert energy_joules(2e15, HW) == pytest.approx(2 * energy_joules(1e15, HW))
    with pytest.raises(ValueError):
        energy_joules(-1, HW)


def test_scenario_compare_at_128k():
    brute, chunked = scenario_compare(131072, 4096, SHAPE, HW)
    expected_brute = 2 * P * 131072 + 2 * L * D * 131072 ** 2
    expected_chunked = 32 * (2 * P * 4096 + 2 * L * D * 4096 ** 2)
    assert brute.flops == pytest.approx(expected_brute)
    assert chunked.flops == pytest.approx(expected_chunked)
    assert chunked.calls == 32
    assert chunked.prompt_tokens == 131072
    assert brute.joules == pytest.approx(brute.flops / 312e12 * 400)
    ratio = brute.joules / chunked.joules
    assert ratio == pytest.approx(expected_brute / expected_chunked)
    assert 3.2 < ratio < 3.4


def test_scenario_compare_degenerate_and_errors():
    brute, chunked = scenario_compare(4096, 4096, SHAPE, HW)
    assert brute.flops == chunked.flops
    _, padded = scenario_compare(4096, 4096, SHAPE, HW, per_chunk_overhead=200)
    assert padded.flops == pytest.approx(forward_flops(SHAPE, 4296))
    _, partial = scenario_compare(5000, 4096, SHAPE, HW)
    assert partial.calls == 2
    with pytest.raises(ValueError):
        scenario_compare(1000, 4096, SHAPE, HW)


def test_sweep_shape():
    assert sweep_lengths(4096, 131072, 6) == [4096, 8192, 16384, 32768, 65536, 131072]
    rows = sweep(SHAPE, HW, window=4096)
    brute = {r.doc_len: r.joules for r in rows if r.scenario == 'brute_force'}
    chunked = {r.doc_len: r.joules for r in rows if r.scenario == 'chunked'}
    # superlinear brute force, linear chunked
    assert brute[131072] / brute[4096] > 32
    for doc_len, joules in chunked.items():
        assert joules == pytest.approx(chunked[4096] * doc_len / 4096, rel=0.01)
    assert all(brute[n] >= chunked[n] for n in brute)


def test_sweep_from_config_and_csv(tmp_path):
    rows = sweep_from_config(EnergyConfig(sweep_points=3), window=4096)
    assert [r.doc_len for r in rows] == [4096, 4096, 23170, 23170, 131072, 131072]
    path = write_sweep_csv(rows, tmp_path / 'out' / 'energy.csv')
    with open(path, newline='', encoding='utf-8') as f:
        reader = csv.DictReader(f)
        assert tuple(reader.fieldnames) == CSV_COLUMNS
        lines = list(reader)
    assert len(lines) == 6
    assert lines[0]['scenario'] == 'brute_force'


def test_plot_sweep(tmp_path):
    pytest.importorskip('matplotlib')
    path = plot_sweep(sweep(SHAPE, HW, window=4096, points=3), tmp_path / 'energy.png')
    assert path.exists() and path.stat().st_size > 0


def test_token_report():
    ledger = CostLedger()
    ledger.record('answer', 300, 20)
    same = token_report(ledger, ledger)
    assert same.ratio == 1.0

    baseline = {'prompt_tokens': 1000, 'response_tokens': 280}
    report = token_report(ledger.snapshot(), baseline, task='t1')
    assert report.ratio == pytest.approx(0.25)
    assert report.to_dict()['task'] == 't1'

    with pytest.raises(DivisionUndefined):
        token_report(ledger, CostLedger())


def test_token_reports_skip_empty_baselines():
    full = {'prompt_tokens': 100, 'response_tokens': 0}
    empty = {'prompt_tokens': 0, 'response_tokens': 0}
    reports = token_reports({'a': full, 'b': full, 'c': full}, {'a': full, 'b': empty})
    assert [r.task for r in reports] == ['a']
    assert mean_ratio(reports) == 1.0
    assert mean_ratio([]) is None
    with pytest.raises(DivisionUndefined):
        token_reports({'b': full}, {'b': empty}, skip_undefined=False)
