#!/usr/bin/env python3
"""
Command-line entry point.

Subcommands:
1. run           - Run one strategy over a JSONL dataset, write the report
2. ablate        - Run lcboost and the baselines, print the comparison table
3. score         - Re-score a predictions file
4. energy-report - Brute-force vs chunked FLOPs/energy sweep, token ratios
5. cache         - Inspect, verify or compact replay stores

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from lcboost.config import BASELINE_NAMES, STRATEGIES, ConfigError, RunConfig, load_config
from lcboost.energy import (
    mean_ratio,
    plot_sweep,
    sweep_from_config,
    token_reports,
    write_sweep_csv,
)
from lcboost.gateway import GatewayError
from lcboost.gateway.replay import compact_store, inspect_store, verify_store
from lcboost.utils import setup_logging, write_json
from lcboost.harness.ingest import IngestError, ingest, load_dataset_manifest
from lcboost.harness.suite import (
    ablate,
    comparison_rows,
    format_table,
    rescore,
    run_suite,
    write_report,
    write_scores_csv,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

# flag dest -> RunConfig field
CONFIG_FLAGS = {
    'strategy': 'strategy',
    'backend': 'backend',
    'window': 'window',
    'chunk_budget': 'chunk_budget',
    'evidence_budget': 'evidence_budget',
    'prompt_reserve': 'prompt_reserve',
    'max_output_tokens': 'max_output_tokens',
    'top_k': 'top_k',
    'concurrency': 'concurrency',
    'seed': 'seed',
    'mock_rules': 'mock_rules',
    'datasets': 'datasets',
    'output_dir': 'output_dir',
}
# flag dest -> ReplayConfig field
REPLAY_FLAGS = {
    'replay_mode': 'mode',
    'store_dir': 'store_dir',
    'replay_backend': 'backend_name',
    'record_from': 'record_from',
}


def build_config(args: argparse.Namespace) -> RunConfig:
    """
    config.yaml (or defaults) with command-line overrides applied.

    Raises:
        ConfigError: for a missing file, unknown keys or inconsistent budgets
    """
    config = load_config(getattr(args, 'config', None))
    replay = {field: getattr(args, dest, None) for dest, field in REPLAY_FLAGS.items()}
    overrides: Dict[str, Any] = {field: getattr(args, dest, None) for dest, field in CONFIG_FLAGS.items()}
    overrides['replay'] = dataclasses.replace(
        config.replay, **{k: v for k, v in replay.items() if v is not None})
    if getattr(args, 'lenient', False):
        overrides['strict'] = False
    return config.with_overrides(**overrides).validate()


def print_json(data: Any) -> None:
    print(json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False))


# ----------------------------------------------------------------------
# Subcommands
# ----------------------------------------------------------------------

def load_records(args: argparse.Namespace, config: RunConfig) -> List:
    records = []
    for path in args.data:
        records.extend(ingest(path, strict=config.strict, dataset=args.dataset))
    return records


def cmd_run(args: argparse.Namespace, config: RunConfig) -> int:
    records = load_records(args, config)
    report = run_suite(records, config, progress=not args.no_progress)
    if not args.no_write:
        write_report(report, Path(config.output_dir) / report.strategy)
    print_json(report.to_dict())
    return EXIT_OK


def cmd_ablate(args: argparse.Namespace, config: RunConfig) -> int:
    strategies = args.strategies or list(STRATEGIES)
    records = load_records(args, config)
    reports = ablate(records, config, strategies, progress=not args.no_progress)
    rows = comparison_rows(reports)
    if not args.no_write:
        out_dir = Path(config.output_dir) / 'ablation'
        for name, report in reports.items():
            write_report(report, out_dir / name)
        write_json(rows, out_dir / 'comparison.json')
    print(format_table(rows))
    return EXIT_OK


def cmd_score(args: argparse.Namespace, config: RunConfig) -> int:
    datasets = load_dataset_manifest(config.datasets)
    result = rescore(args.predictions, datasets)
    if args.scores_csv:
        write_scores_csv(result['examples'], args.scores_csv)
    print_json({'aggregates': result['aggregates'], 'examples': len(result['examples'])})
    return EXIT_OK


def _report_ledgers(path: Path) -> Dict[str, Dict[str, int]]:
    """record id -> token totals from a report.json written by `run`."""
    with open(path, 'r', encoding='utf-8') as f:
        data = json.load(f)
    return {r['id']: {'prompt_tokens': r['prompt_tokens'], 'response_tokens': r['response_tokens']}
            for r in data.get('results', [])}


def cmd_energy(args: argparse.Namespace, config: RunConfig) -> int:
    energy = config.energy
    sweep_overrides = {'sweep_points': args.points, 'sweep_min': args.min_tokens,
                       'sweep_max': args.max_tokens, 'formula': args.formula,
                       'per_chunk_overhead': args.overhead}
    energy = dataclasses.replace(energy, **{k: v for k, v in sweep_overrides.items() if v is not None})

    rows = sweep_from_config(energy, window=config.window)
    csv_path = write_sweep_csv(rows, args.csv or Path(config.output_dir) / 'energy.csv')
    if args.plot:
        plot_sweep(rows, args.plot)

    brute = {r.doc_len: r for r in rows if r.scenario == 'brute_force'}
    chunked = {r.doc_len: r for r in rows if r.scenario == 'chunked'}
    output: Dict[str, Any] = {
        'window': config.window,
        'formula': energy.formula,
        'csv': str(csv_path),
        'rows': [r.to_row() for r in rows],
        'energy_ratio': {str(n): round(brute[n].joules / chunked[n].joules, 6) for n in sorted(brute)},
    }

    if args.report and args.baseline_report:
        reports = token_reports(_report_ledgers(args.report), _report_ledgers(args.baseline_report))
        ratio = mean_ratio(reports)
        output['token_ratios'] = [r.to_dict() for r in reports]
        output['mean_token_ratio'] = round(ratio, 6) if ratio is not None else None
    print_json(output)
    return EXIT_OK


def _store_files(path: Path) -> List[Path]:
    path = Path(path)
    if path.is_dir():
        return sorted(path.glob('*.jsonl'))
    if not path.exists():
        raise FileNotFoundError(f"no replay store at {path}")
    return [path]


def cmd_cache(args: argparse.Namespace, config: RunConfig) -> int:
    files = _store_files(args.path)
    if args.action == 'inspect':
        print_json([inspect_store(p) for p in files])
        return EXIT_OK
    if args.action == 'verify':
        problems = {str(p): verify_store(p) for p in files}
        problems = {p: msgs for p, msgs in problems.items() if msgs}
        print_json({'stores': len(files), 'problems': problems})
        return EXIT_FAILURE if problems else EXIT_OK
    print_json({str(p): compact_store(p) for p in files})
    return EXIT_OK


COMMANDS = {
    'run': cmd_run,
    'ablate': cmd_ablate,
    'score': cmd_score,
    'energy-report': cmd_energy,
    'cache': cmd_cache,
}


# ----------------------------------------------------------------------
# Argument parsing
# ----------------------------------------------------------------------

def _strategy_list(text: str) -> List[str]:
    names = [n.strip() for n in text.split(',') if n.strip()]
    unknown = [n for n in names if n not in STRATEGIES]
    if not names or unknown:
        raise argparse.ArgumentTypeError(
            f"unknown strategies {unknown}; choose from {', '.join(STRATEGIES)}")
    return names


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='lcboost',
        description='Short-window long-context engine: runs, ablations, scoring and cost reports',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python -m lcboost run --data data/narrativeqa.jsonl --config config.yaml
  python -m lcboost run --strategy lcboost --backend replay --data fixtures.jsonl
  python -m lcboost run --backend replay --replay-mode record --record-from remote --data qa.jsonl
  python -m lcboost ablate --strategies retrieve_only,append_only --data fixtures.jsonl
  python -m lcboost score --predictions runs/lcboost/predictions.jsonl
  python -m lcboost energy-report --plot runs/energy.png
  python -m lcboost cache verify runs/replay
"""
    )
    parser.add_argument('--config', '-c', type=Path, default=None,
                        help='YAML config file (default: built-in defaults)')
    parser.add_argument('--log-level', type=str, default=None,
                        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'],
                        help='Console log level (overrides logging.console_level)')
    sub = parser.add_subparsers(dest='command', required=True)

    engine = argparse.ArgumentParser(add_help=False)
    engine.add_argument('--data', '-d', type=Path, nargs='+', required=True,
                        help='JSONL dataset file(s)')
    engine.add_argument('--dataset', type=str, default=None,
                        help='Dataset name for records that do not carry one')
    engine.add_argument('--backend', '-b', type=str, choices=['mock', 'remote', 'replay'],
                        help='Backend kind')
    engine.add_argument('--mock-rules', type=str, help='Mock rule file (YAML)')
    engine.add_argument('--replay-mode', type=str, choices=['record', 'replay'],
                        help='Replay store mode')
    engine.add_argument('--store-dir', type=str, help='Replay store directory')
    engine.add_argument('--replay-backend', type=str,
                        help='Backend name the replay store was recorded against')
    engine.add_argument('--record-from', type=str, choices=['mock', 'remote'],
                        help='Backend wrapped in record mode')
    engine.add_argument('--window', type=int, help='Working window in tokens')
    engine.add_argument('--chunk-budget', type=int, help='Max tokens per chunk')
    engine.add_argument('--evidence-budget', type=int, help='Max tokens of evidence')
    engine.add_argument('--prompt-reserve', type=int, help='Tokens reserved for instructions and output')
    engine.add_argument('--max-output-tokens', type=int, help='Per-call output allowance')
    engine.add_argument('--top-k', type=int, help='Chunks kept by Retrieve')
    engine.add_argument('--concurrency', '-j', type=int, help='Records run in parallel')
    engine.add_argument('--seed', type=int, help='Random seed')
    engine.add_argument('--datasets', type=str, help='Dataset manifest (YAML)')
    engine.add_argument('--output-dir', '-o', type=str, help='Where reports are written')
    engine.add_argument('--lenient', action='store_true', help='Skip malformed dataset lines')
    engine.add_argument('--no-write', action='store_true', help='Print the report only')
    engine.add_argument('--no-progress', action='store_true', help='Hide progress bars')

    run = sub.add_parser('run', parents=[engine], help='Run one strategy over a dataset')
    run.add_argument('--strategy', '-s', type=str, choices=list(STRATEGIES),
                     help='lcboost or a baseline name')

    abl = sub.add_parser('ablate', parents=[engine], help='Compare lcboost with the baselines')
    abl.add_argument('--strategies', type=_strategy_list, default=None,
                     help=f"Comma-separated strategies (default: lcboost,{','.join(BASELINE_NAMES)})")

    score = sub.add_parser('score', help='Re-score a predictions file')
    score.add_argument('--predictions', '-p', type=Path, required=True,
                       help='JSONL with id, dataset, answers and answer/prediction')
    score.add_argument('--datasets', type=str, help='Dataset manifest (YAML)')
    score.add_argument('--scores-csv', type=Path, help='Also write per-example scores here')

    energy = sub.add_parser('energy-report', help='FLOPs and energy sweep')
    energy.add_argument('--window', type=int, help='Chunked-scenario window')
    energy.add_argument('--points', type=int, help='Sweep points')
    energy.add_argument('--min-tokens', type=int, help='Shortest document')
    energy.add_argument('--max-tokens', type=int, help='Longest document')
    energy.add_argument('--formula', type=str, help='FLOPs formula (dense, attention_only, params_only)')
    energy.add_argument('--overhead', type=int, help='Prompt tokens added to every chunked call')
    energy.add_argument('--csv', type=Path, help='CSV output path (default: <output_dir>/energy.csv)')
    energy.add_argument('--plot', type=Path, help='Also save a PNG plot')
    energy.add_argument('--output-dir', '-o', type=str, help='Where the CSV is written by default')
    energy.add_argument('--report', type=Path, help='report.json of a run, for token ratios')
    energy.add_argument('--baseline-report', type=Path, help='report.json of the baseline run')

    cache = sub.add_parser('cache', help='Replay store maintenance')
    cache.add_argument('action', choices=['inspect', 'verify', 'compact'])
    cache.add_argument('path', type=Path, help='Store file or directory of stores')

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        config = build_config(args)
    except ConfigError as e:
        print(f"lcboost: configuration error: {e}", file=sys.stderr)
        return EXIT_USAGE

    setup_logging(log_dir=config.logging.log_dir, log_file=config.logging.log_file,
                  console_level=args.log_level or config.logging.console_level,
                  file_level=config.logging.file_level)

    try:
        return COMMANDS[args.command](args, config)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_USAGE
    except (IngestError, GatewayError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_FAILURE
    except Exception as e:
        logger.error(f"{args.command} failed: {e}", exc_info=True)
        return EXIT_FAILURE


if __name__ == '__main__':
    sys.exit(main())
