#!/usr/bin/env python3
"""
Benchmark record ingestion and the dataset manifest.

Records are LongBench-style JSON lines:

    {"_id": "...", "dataset": "narrativeqa", "input": "question",
     "context": "long text", "answers": ["..."], "length": 18409}

Unknown fields are kept on the record (DatasetRecord.extras). In strict
mode the first malformed line aborts ingestion; in lenient mode it is
logged and skipped.

Usage:
    records = ingest(Path('data/narrativeqa.jsonl'), strict=False)
    datasets = load_dataset_manifest()
    task = datasets[records[0].dataset].task_for(records[0])
"""

import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from pydantic import AliasChoices, BaseModel, ConfigDict, Field, ValidationError, field_validator

from lcboost.constants import TASK_CATEGORIES
from lcboost.metrics import METRICS
from lcboost.utils import load_yaml
from lcboost.engine.types import TaskSpec

logger = logging.getLogger(__name__)

DATASETS_PATH = Path(__file__).parent / 'datasets.yaml'
UNSAFE_ID_RE = re.compile(r'[^A-Za-z0-9._-]')


def safe_name(text: str) -> str:
    """text with anything but [A-Za-z0-9._-] replaced, for file names."""
    return UNSAFE_ID_RE.sub('_', text)


class IngestError(ValueError):
    """A malformed dataset line or manifest entry."""

    def __init__(self, message: str, line_no: Optional[int] = None):
        super().__init__(f"line {line_no}: {message}" if line_no is not None else message)
        self.detail = message
        self.line_no = line_no


class DatasetRecord(BaseModel):
    """One benchmark example."""
    model_config = ConfigDict(extra='allow', populate_by_name=True)

    id: str = Field(validation_alias=AliasChoices('id', '_id'))
    dataset: str
    input: Optional[str] = None
    context: str
    answers: List[str]
    length: Optional[int] = None

    @field_validator('id', mode='before')
    @classmethod
    def _id_as_text(cls, value: Any) -> Any:
        return str(value) if isinstance(value, int) else value

    @field_validator('context')
    @classmethod
    def _context_not_empty(cls, value: str) -> str:
        if not value.strip():
            raise ValueError("context must not be empty")
        return value

    @field_validator('answers')
    @classmethod
    def _answers_not_empty(cls, value: List[str]) -> List[str]:
        if not value:
            raise ValueError("answers must not be empty")
        return value

    @property
    def query(self) -> Optional[str]:
        return self.input if self.input and self.input.strip() else None

    @property
    def extras(self) -> Dict[str, Any]:
        """Fields outside the schema, passed through untouched."""
        return dict(self.model_extra or {})

    @property
    def safe_id(self) -> str:
        return safe_name(self.id)


def _parse_record(line: str, line_no: int, dataset: Optional[str]) -> DatasetRecord:
    try:
        data = json.loads(line)
    except json.JSONDecodeError as e:
        raise IngestError(f"invalid JSON: {e.msg}", line_no) from e
    if not isinstance(data, dict):
        raise IngestError(f"expected an object, got {type(data).__name__}", line_no)
    if dataset and not data.get('dataset'):
        data['dataset'] = dataset
    try:
        return DatasetRecord.model_validate(data)
    except ValidationError as e:
        problems = '; '.join(f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}"
                             for err in e.errors())
        raise IngestError(problems, line_no) from e


def ingest(path: Path, strict: bool = True, dataset: Optional[str] = None) -> List[DatasetRecord]:
    """
    Read a JSONL dataset file.

    Args:
        path: UTF-8 newline-delimited JSON
        strict: Abort on the first malformed line (else skip it with a warning)
        dataset: Dataset name for records that do not carry one

    Returns:
        Records in file order

    Raises:
        IngestError: in strict mode, naming the bad line; also for duplicate ids
    """
    path = Path(path)
    records: List[DatasetRecord] = []
    seen: Dict[str, int] = {}
    skipped = 0
    with open(path, 'r', encoding='utf-8') as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = _parse_record(line, line_no, dataset)
                if record.id in seen:
                    raise IngestError(f"duplicate id {record.id!r} (first on line {seen[record.id]})",
                                      line_no)
            except IngestError as e:
                if strict:
                    raise IngestError(f"{path}: {e.detail}", e.line_no) from e
                logger.warning(f"Skipping {path}:{line_no}: {e}")
                skipped += 1
                continue
            seen[record.id] = line_no
            records.append(record)

    logger.info(f"Ingested {len(records)} records from {path}"
                + (f" ({skipped} skipped)" if skipped else ''))
    return records


@dataclass(frozen=True)
class DatasetSpec:
    """How one dataset is prompted and scored."""
    name: str
    category: str
    metrics: Tuple[str, ...]
    answer_template: str
    description: str = ''
    scan_template: Optional[str] = None

    @property
    def primary_metric(self) -> str:
        return self.metrics[0]

    def task_for(self, record: DatasetRecord) -> TaskSpec:
        return TaskSpec(name=record.id, category=self.category,
                        answer_template=self.answer_template, query=record.query,
                        description=self.description, scan_template=self.scan_template)


def _build_spec(name: str, entry: Dict[str, Any]) -> DatasetSpec:
    if not isinstance(entry, dict):
        raise IngestError(f"dataset '{name}': expected a mapping")
    unknown = set(entry) - {'category', 'metrics', 'answer_template', 'description', 'scan_template'}
    if unknown:
        raise IngestError(f"dataset '{name}': unknown keys {sorted(unknown)}")
    category = entry.get('category')
    if category not in TASK_CATEGORIES:
        raise IngestError(f"dataset '{name}': category must be one of {TASK_CATEGORIES}, got {category!r}")
    metrics = entry.get('metrics') or []
    if isinstance(metrics, str):
        metrics = [metrics]
    bad = [m for m in metrics if m not in METRICS]
    if not metrics or bad:
        raise IngestError(f"dataset '{name}': metrics must be a non-empty subset of {sorted(METRICS)}")
    if not entry.get('answer_template'):
        raise IngestError(f"dataset '{name}': answer_template is required")
    return DatasetSpec(name=name, category=category, metrics=tuple(metrics),
                       answer_template=entry['answer_template'],
                       description=entry.get('description') or '',
                       scan_template=entry.get('scan_template'))


def load_dataset_manifest(path: Optional[Path] = None) -> Dict[str, DatasetSpec]:
    """
    Load dataset name -> DatasetSpec.

    Raises:
        IngestError: for an unknown category or metric, or a missing template name
    """
    path = Path(path) if path else DATASETS_PATH
    data = load_yaml(path)
    specs = {str(name): _build_spec(str(name), entry) for name, entry in data.items()}
    logger.debug(f"Loaded {len(specs)} dataset specs from {path}")
    return specs
