"""Dataset ingestion, suite runs, reports and re-scoring."""

from lcboost.harness.ingest import (
    DatasetRecord,
    DatasetSpec,
    IngestError,
    ingest,
    load_dataset_manifest,
)
from lcboost.harness.suite import (
    RecordResult,
    RecordStatus,
    RunReport,
    ablate,
    rescore,
    run_record,
    run_suite,
    write_report,
)

__all__ = [
    'DatasetRecord',
    'DatasetSpec',
    'IngestError',
    'RecordResult',
    'RecordStatus',
    'RunReport',
    'ablate',
    'ingest',
    'load_dataset_manifest',
    'rescore',
    'run_record',
    'run_suite',
    'write_report',
]
