#!/usr/bin/env python3
"""
Suite runner: one strategy over many benchmark records.

Each record gets its own gateway, ledger and (under replay) its own store
file `<replay.store_dir>/<record id>.jsonl`, so records run independently
on a bounded thread pool and results do not depend on the pool width.
Reports are ordered by record id.

A record whose run fails is kept in the report with status 'failed' and a
score of 0 for every metric. Only an unreachable backend outside replay
mode or a mock rule set that cannot be loaded stops the suite.

Usage:
    records = ingest(Path('data/narrativeqa.jsonl'))
    report = run_suite(records, config)
    write_report(report, Path('runs/narrativeqa'))
"""

import csv
import json
import logging
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from lcboost.config import RunConfig
from lcboost.constants import STRATEGY_LCBOOST
from lcboost.gateway import Backend, BackendUnavailable, GatewayError, InvalidRuleSet, create_gateway
from lcboost.metrics import ScoredExample, get_metric, mean_score, score_example
from lcboost.text_segmentation import ContextDocument
from lcboost.utils import canonical_json, format_time, sha256_text, write_json
from lcboost.engine import LCBoostEngine, RunError, run_baseline
from lcboost.harness.ingest import DatasetRecord, DatasetSpec, IngestError, load_dataset_manifest, safe_name

logger = logging.getLogger(__name__)

# Builds the backend a record runs against (tests and record mode)
BackendFactory = Callable[[DatasetRecord], Backend]


class RecordStatus(str, Enum):
    COMPLETED = "completed"
    FAILED = "failed"


@dataclass
class RecordResult:
    """Outcome of one record under one strategy."""
    record_id: str
    dataset: str
    strategy: str
    status: RecordStatus
    answers: List[str]
    answer: str = ''
    scores: Dict[str, float] = field(default_factory=dict)
    trace: Dict[str, Any] = field(default_factory=dict)
    ledger: Dict[str, Any] = field(default_factory=dict)
    low_confidence: bool = False
    error: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            'id': self.record_id,
            'dataset': self.dataset,
            'strategy': self.strategy,
            'status': self.status.value,
            'answer': self.answer,
            'answers': list(self.answers),
            'scores': {k: round(v, 6) for k, v in sorted(self.scores.items())},
            'low_confidence': self.low_confidence,
            'error': self.error,
            'calls': self.ledger.get('calls', 0),
            'prompt_tokens': self.ledger.get('prompt_tokens', 0),
            'response_tokens': self.ledger.get('response_tokens', 0),
        }


@dataclass
class RunReport:
    """Per-record results plus per-dataset aggregates."""
    strategy: str
    results: List[RecordResult]
    wall_time: float = 0.0

    @property
    def undefined(self) -> bool:
        """True when there is nothing to aggregate."""
        return not self.results

    def aggregates(self) -> Dict[str, Dict[str, float]]:
        """dataset -> metric -> mean score over that dataset's records."""
        scores: Dict[str, Dict[str, List[float]]] = {}
        for result in self.results:
            for metric, score in result.scores.items():
                scores.setdefault(result.dataset, {}).setdefault(metric, []).append(score)
        return {dataset: {metric: float(np.mean(values)) for metric, values in sorted(by_metric.items())}
                for dataset, by_metric in sorted(scores.items())}

    def totals(self) -> Dict[str, int]:
        totals = {'records': len(self.results), 'failed': 0, 'calls': 0,
                  'prompt_tokens': 0, 'response_tokens': 0}
        for result in self.results:
            totals['failed'] += result.status == RecordStatus.FAILED
            for key in ('calls', 'prompt_tokens', 'response_tokens'):
                totals[key] += result.ledger.get(key, 0)
        totals['total_tokens'] = totals['prompt_tokens'] + totals['response_tokens']
        return totals

    def to_dict(self, include_wall_time: bool = False) -> Dict[str, Any]:
        """
        Serializable report. Without wall time it is a pure function of the
        inputs, so replayed suites compare byte for byte.
        """
        data = {
            'strategy': self.strategy,
            'undefined': self.undefined,
            'aggregates': {d: {m: round(v, 6) for m, v in ms.items()}
                           for d, ms in self.aggregates().items()},
            'totals': self.totals(),
            'results': [r.to_dict() for r in self.results],
        }
        if include_wall_time:
            data['wall_time'] = round(self.wall_time, 3)
        return data


# ----------------------------------------------------------------------
# Running
# ----------------------------------------------------------------------

def _store_path(config: RunConfig, record: DatasetRecord) -> Optional[Path]:
    if config.backend != 'replay':
        return None
    return Path(config.replay.store_dir) / f"{record.safe_id}.jsonl"


def _score(spec: DatasetSpec, answer: str, answers: Sequence[str]) -> Dict[str, float]:
    return {metric: get_metric(metric)(answer, answers) for metric in spec.metrics}


def _failed(record: DatasetRecord, spec: DatasetSpec, strategy: str, error: str,
            ledger: Optional[Dict[str, Any]] = None,
            trace: Optional[Dict[str, Any]] = None) -> RecordResult:
    return RecordResult(record_id=record.id, dataset=record.dataset, strategy=strategy,
                        status=RecordStatus.FAILED, answers=list(record.answers),
                        scores={m: 0.0 for m in spec.metrics}, trace=trace or {},
                        ledger=ledger or {}, error=error)


def run_record(record: DatasetRecord, spec: DatasetSpec, config: RunConfig,
               strategy: str = STRATEGY_LCBOOST,
               backend_factory: Optional[BackendFactory] = None) -> RecordResult:
    """
    Run and score one record.

    A gateway that cannot be built for this record (its replay store is
    corrupt, for one) fails the record like a failure during the run.

    Raises:
        BackendUnavailable: when the backend cannot be reached outside replay mode
        InvalidRuleSet: when the configured mock rules cannot be loaded
    """
    task = spec.task_for(record)
    doc = ContextDocument(record.context)

    try:
        inner = backend_factory(record) if backend_factory else None
        gateway = create_gateway(config, store_path=_store_path(config, record), inner=inner)
    except InvalidRuleSet:
        raise
    except GatewayError as e:
        if isinstance(e, BackendUnavailable) and config.backend != 'replay':
            raise
        logger.warning(f"{record.id}: no gateway: {type(e).__name__}: {e}")
        return _failed(record, spec, strategy, f"{type(e).__name__}: {e}")
    engine = LCBoostEngine(gateway, config)

    try:
        if strategy == STRATEGY_LCBOOST:
            answer = engine.run(task, doc)
        else:
            answer = run_baseline(engine, strategy, task, doc, seed=config.seed)
    except RunError as e:
        if isinstance(e.__cause__, BackendUnavailable) and config.backend != 'replay':
            raise e.__cause__
        return _failed(record, spec, strategy, str(e), ledger=e.ledger,
                       trace={'steps': e.trajectory.to_dict()['steps'], 'error': str(e)})
    except BackendUnavailable:
        raise
    except Exception as e:
        logger.error(f"{record.id}: unexpected failure: {e}", exc_info=True)
        return _failed(record, spec, strategy, f"{type(e).__name__}: {e}", ledger=engine.snapshot())

    return RecordResult(record_id=record.id, dataset=record.dataset, strategy=strategy,
                        status=RecordStatus.COMPLETED, answers=list(record.answers),
                        answer=answer.text, scores=_score(spec, answer.text, record.answers),
                        trace=answer.to_dict(), ledger=answer.ledger,
                        low_confidence=answer.low_confidence)


def run_suite(records: Sequence[DatasetRecord], config: RunConfig,
              datasets: Optional[Mapping[str, DatasetSpec]] = None,
              strategy: Optional[str] = None,
              backend_factory: Optional[BackendFactory] = None,
              progress: bool = True) -> RunReport:
    """
    Run one strategy over all records with config.concurrency workers.

    Args:
        records: Ingested records
        config: Validated run configuration
        datasets: Dataset specs (the packaged manifest when None)
        strategy: 'lcboost' or a baseline name (config.strategy when None)
        backend_factory: Per-record backend override
        progress: Show a tqdm progress bar

    Raises:
        IngestError: if a record names a dataset missing from the manifest
        BackendUnavailable, InvalidRuleSet: as run_record
    """
    strategy = strategy or config.strategy
    datasets = datasets if datasets is not None else load_dataset_manifest(config.datasets)
    unknown = sorted({r.dataset for r in records} - set(datasets))
    if unknown:
        raise IngestError(f"no dataset spec for {unknown}; known: {sorted(datasets)}")

    logger.info(f"Running {strategy} over {len(records)} records "
                f"({config.concurrency} workers, backend {config.backend})")
    start = time.perf_counter()
    results: List[RecordResult] = []
    with ThreadPoolExecutor(max_workers=config.concurrency) as pool:
        futures = [pool.submit(run_record, record, datasets[record.dataset], config,
                               strategy, backend_factory) for record in records]
        for future in tqdm(as_completed(futures), total=len(futures), desc=strategy,
                           disable=not progress):
            results.append(future.result())

    results.sort(key=lambda r: r.record_id)
    report = RunReport(strategy=strategy, results=results, wall_time=time.perf_counter() - start)
    failed = report.totals()['failed']
    logger.info(f"{strategy}: {len(results)} records in {format_time(report.wall_time)}"
                + (f", {failed} failed" if failed else ''))
    return report


def ablate(records: Sequence[DatasetRecord], config: RunConfig, strategies: Sequence[str],
           datasets: Optional[Mapping[str, DatasetSpec]] = None,
           backend_factory: Optional[BackendFactory] = None,
           progress: bool = True) -> Dict[str, RunReport]:
    """One suite per strategy, in the order given."""
    datasets = datasets if datasets is not None else load_dataset_manifest(config.datasets)
    return {name: run_suite(records, config, datasets, strategy=name,
                            backend_factory=backend_factory, progress=progress)
            for name in strategies}


def comparison_rows(reports: Mapping[str, RunReport]) -> List[Dict[str, Any]]:
    """One row per strategy: headline score per dataset/metric and token totals."""
    rows = []
    for strategy, report in reports.items():
        row: Dict[str, Any] = {'strategy': strategy}
        for dataset, by_metric in report.aggregates().items():
            for metric, score in by_metric.items():
                row[f"{dataset}/{metric}"] = round(score, 4)
        totals = report.totals()
        row['total_tokens'] = totals['total_tokens']
        row['failed'] = totals['failed']
        rows.append(row)
    return rows


def format_table(rows: Sequence[Dict[str, Any]]) -> str:
    """Plain-text table with one column per key seen in any row."""
    if not rows:
        return ''
    columns: List[str] = []
    for row in rows:
        columns.extend(k for k in row if k not in columns)
    cells = [[str(row.get(c, '')) for c in columns] for row in rows]
    widths = [max(len(c), *(len(r[i]) for r in cells)) for i, c in enumerate(columns)]
    lines = [' | '.join(c.ljust(w) for c, w in zip(columns, widths)),
             '-+-'.join('-' * w for w in widths)]
    lines.extend(' | '.join(v.ljust(w) for v, w in zip(r, widths)) for r in cells)
    return '\n'.join(lines)


# ----------------------------------------------------------------------
# Output and re-scoring
# ----------------------------------------------------------------------

SCORE_COLUMNS = ('id', 'dataset', 'metric', 'score')


def write_scores_csv(examples: Sequence[ScoredExample], path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.DictWriter(f, fieldnames=SCORE_COLUMNS)
        writer.writeheader()
        for example in examples:
            writer.writerow({'id': example.record_id, 'dataset': example.dataset,
                             'metric': example.metric, 'score': round(example.score, 6)})
    return path


def report_examples(report: RunReport) -> List[ScoredExample]:
    return [ScoredExample(record_id=r.record_id, metric=metric, prediction=r.answer,
                          references=list(r.answers), score=score, dataset=r.dataset)
            for r in report.results for metric, score in sorted(r.scores.items())]


def write_report(report: RunReport, out_dir: Path) -> Dict[str, Path]:
    """
    Write report.json, traces/<id>.json and scores.csv under out_dir.

    Returns:
        Mapping of artifact name to path
    """
    out_dir = Path(out_dir)
    paths = {'report': out_dir / 'report.json', 'scores': out_dir / 'scores.csv',
             'traces': out_dir / 'traces'}
    write_json(report.to_dict(), paths['report'])
    for result in report.results:
        write_json(result.trace, paths['traces'] / f"{safe_name(result.record_id)}.json")
    write_scores_csv(report_examples(report), paths['scores'])
    logger.info(f"Report written to {out_dir}")
    return paths


def report_hash(report: RunReport) -> str:
    return sha256_text(canonical_json(report.to_dict()))


def rescore(path: Path, datasets: Mapping[str, DatasetSpec]) -> Dict[str, Any]:
    """
    Re-score a predictions file.

    Each line needs id, dataset, answers and the prediction under 'answer'
    (or 'prediction'). Lines of a report's results list qualify. A record
    is identified by (dataset, id), so ids may repeat across datasets.

    Returns:
        {'examples': [ScoredExample], 'datasets': {dataset: record count},
         'aggregates': {dataset: {metric: mean or None}}}

    Raises:
        IngestError: for a malformed line, a missing id, a repeated
            (dataset, id) pair or an unknown dataset
    """
    path = Path(path)
    examples: List[ScoredExample] = []
    seen: Dict[Tuple[str, str], int] = {}
    with open(path, 'r', encoding='utf-8') as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
                raw_id = data.get('id', data.get('_id'))
                dataset = data['dataset']
                answers = list(data['answers'])
                prediction = data.get('answer', data.get('prediction'))
            except (ValueError, KeyError, TypeError, AttributeError) as e:
                raise IngestError(f"{path}: unreadable prediction: {e}", line_no) from e
            if raw_id is None or str(raw_id).strip() == '':
                raise IngestError(f"{path}: prediction has no id", line_no)
            record_id = str(raw_id)
            if prediction is None or not answers:
                raise IngestError(f"{path}: prediction and answers are required", line_no)
            if dataset not in datasets:
                raise IngestError(f"{path}: unknown dataset {dataset!r}", line_no)
            if (dataset, record_id) in seen:
                raise IngestError(f"{path}: duplicate id {record_id!r} in {dataset} "
                                  f"(first on line {seen[dataset, record_id]})", line_no)
            seen[dataset, record_id] = line_no
            for metric in datasets[dataset].metrics:
                examples.append(score_example(metric, prediction, answers,
                                              record_id=record_id, dataset=dataset))

    counts = Counter(dataset for dataset, _ in seen)
    aggregates: Dict[str, Dict[str, Optional[float]]] = {}
    for dataset in sorted(counts):
        for metric in datasets[dataset].metrics:
            scored = [e for e in examples if e.dataset == dataset and e.metric == metric]
            aggregates.setdefault(dataset, {})[metric] = mean_score(scored)
    logger.info(f"Re-scored {len(seen)} predictions from {path}")
    return {'examples': examples, 'datasets': dict(sorted(counts.items())), 'aggregates': aggregates}
