#!/usr/bin/env python3
"""
Closed-form FLOPs, energy and token accounting.

Compares one brute-force forward pass over a whole document with a chunked
run that only ever attends over `window` tokens. FLOPs follow the dense
transformer convention

    forward_flops(T) = 2 * P * T + 2 * layers * hidden * T^2

(parameter term plus attention term); energy is FLOPs divided by peak
throughput times board power. Generation-phase KV-cache costs are not
modeled. Alternative formulas register in FLOP_FORMULAS.

Usage:
    shape, hw = ModelShape.from_config(config.energy), HardwareProfile.from_config(config.energy)
    brute, chunked = scenario_compare(131072, 4096, shape, hw)
    rows = sweep(shape, hw, window=4096)
    write_sweep_csv(rows, Path('runs/energy.csv'))
"""

import csv
import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from lcboost.config import EnergyConfig
from lcboost.gateway.ledger import CostLedger

logger = logging.getLogger(__name__)

SCENARIO_BRUTE = 'brute_force'
SCENARIO_CHUNKED = 'chunked'
CSV_COLUMNS = ('doc_len', 'scenario', 'flops', 'joules', 'prompt_tokens')


class DivisionUndefined(ZeroDivisionError):
    """A ratio was asked for against a baseline with no tokens."""


@dataclass(frozen=True)
class ModelShape:
    params: float
    hidden: int
    layers: int

    def __post_init__(self):
        if self.params <= 0 or self.hidden <= 0 or self.layers <= 0:
            raise ValueError(f"model shape must be positive, got {self}")

    @classmethod
    def from_config(cls, energy: EnergyConfig) -> 'ModelShape':
        return cls(params=float(energy.params), hidden=int(energy.hidden), layers=int(energy.layers))


@dataclass(frozen=True)
class HardwareProfile:
    peak_flops: float
    power_watts: float

    def __post_init__(self):
        if self.peak_flops <= 0 or self.power_watts <= 0:
            raise ValueError(f"hardware profile must be positive, got {self}")

    @classmethod
    def from_config(cls, energy: EnergyConfig) -> 'HardwareProfile':
        return cls(peak_flops=float(energy.peak_flops), power_watts=float(energy.power_watts))


@dataclass(frozen=True)
class ScenarioCost:
    """One scenario at one document length. joules == flops / peak * power."""
    scenario: str
    doc_len: int
    flops: float
    joules: float
    prompt_tokens: int
    calls: int

    def to_row(self) -> Dict[str, Any]:
        return {name: getattr(self, name) for name in CSV_COLUMNS}


# ----------------------------------------------------------------------
# FLOPs and energy
# ----------------------------------------------------------------------

FlopFormula = Callable[[ModelShape, int], float]


def dense_flops(shape: ModelShape, seq_len: int) -> float:
    return 2.0 * shape.params * seq_len + 2.0 * shape.layers * shape.hidden * seq_len ** 2


def attention_only_flops(shape: ModelShape, seq_len: int) -> float:
    return 2.0 * shape.layers * shape.hidden * seq_len ** 2


def params_only_flops(shape: ModelShape, seq_len: int) -> float:
    return 2.0 * shape.params * seq_len


FLOP_FORMULAS: Dict[str, FlopFormula] = {
    'dense': dense_flops,
    'attention_only': attention_only_flops,
    'params_only': params_only_flops,
}


def register_formula(name: str, formula: FlopFormula) -> None:
    FLOP_FORMULAS[name] = formula


def forward_flops(shape: ModelShape, seq_len: int, formula: str = 'dense') -> float:
    """
    FLOPs of one forward pass over seq_len tokens.

    Raises:
        ValueError: if seq_len < 1 or the formula is unknown
    """
    if seq_len < 1:
        raise ValueError(f"seq_len must be >= 1, got {seq_len}")
    if formula not in FLOP_FORMULAS:
        raise ValueError(f"Unknown formula: {formula}. Choose from: {', '.join(FLOP_FORMULAS)}")
    return FLOP_FORMULAS[formula](shape, seq_len)


def energy_joules(flops: float, hw: HardwareProfile) -> float:
    """Seconds at peak throughput times power."""
    if flops < 0:
        raise ValueError(f"flops must be non-negative, got {flops}")
    return flops / hw.peak_flops * hw.power_watts


def scenario_compare(doc_len: int, window: int, shape: ModelShape, hw: HardwareProfile,
                     formula: str = 'dense',
                     per_chunk_overhead: int = 0) -> Tuple[ScenarioCost, ScenarioCost]:
    """
    Brute force over doc_len tokens against ceil(doc_len / window) window-sized calls.

    Args:
        per_chunk_overhead: Prompt tokens (instructions, query) added to every
            chunked call

    Returns:
        (brute, chunked)

    Raises:
        ValueError: if window < 1, window > doc_len or per_chunk_overhead < 0
    """
    if window < 1 or window > doc_len:
        raise ValueError(f"need 1 <= window <= doc_len, got window {window}, doc_len {doc_len}")
    if per_chunk_overhead < 0:
        raise ValueError("per_chunk_overhead must be non-negative")

    brute_flops = forward_flops(shape, doc_len, formula)
    brute = ScenarioCost(scenario=SCENARIO_BRUTE, doc_len=doc_len, flops=brute_flops,
                         joules=energy_joules(brute_flops, hw), prompt_tokens=doc_len, calls=1)

    n_calls = math.ceil(doc_len / window)
    call_len = window + per_chunk_overhead
    chunked_flops = n_calls * forward_flops(shape, call_len, formula)
    chunked = ScenarioCost(scenario=SCENARIO_CHUNKED, doc_len=doc_len, flops=chunked_flops,
                           joules=energy_joules(chunked_flops, hw),
                           prompt_tokens=n_calls * call_len, calls=n_calls)
    return brute, chunked


def sweep_lengths(min_tokens: int, max_tokens: int, points: int) -> List[int]:
    """Geometric grid of document lengths, endpoints included."""
    if points < 2 or min_tokens < 1 or max_tokens < min_tokens:
        raise ValueError(f"bad sweep: {min_tokens}..{max_tokens} in {points} points")
    grid = np.geomspace(min_tokens, max_tokens, num=points)
    return sorted({int(round(x)) for x in grid})


def sweep(shape: ModelShape, hw: HardwareProfile, window: int,
          min_tokens: int = 4096, max_tokens: int = 131072, points: int = 6,
          formula: str = 'dense', per_chunk_overhead: int = 0) -> List[ScenarioCost]:
    """Both scenarios at every sweep length, brute force first."""
    rows = []
    for doc_len in sweep_lengths(max(min_tokens, window), max_tokens, points):
        rows.extend(scenario_compare(doc_len, window, shape, hw, formula, per_chunk_overhead))
    logger.info(f"Energy sweep: {len(rows) // 2} lengths from {rows[0].doc_len} to {rows[-1].doc_len}")
    return rows


def sweep_from_config(energy: EnergyConfig, window: int) -> List[ScenarioCost]:
    return sweep(ModelShape.from_config(energy), HardwareProfile.from_config(energy), window,
                 min_tokens=energy.sweep_min, max_tokens=energy.sweep_max,
                 points=energy.sweep_points, formula=energy.formula,
                 per_chunk_overhead=energy.per_chunk_overhead)


def write_sweep_csv(rows: Sequence[ScenarioCost], path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.DictWriter(f, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow(row.to_row())
    logger.info(f"Energy sweep written to {path}")
    return path


def plot_sweep(rows: Sequence[ScenarioCost], save_path: Path) -> Path:
    """Joules against document length for both scenarios, log-log."""
    import matplotlib
    matplotlib.use('Agg')
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(8, 5))
    for scenario, label in ((SCENARIO_BRUTE, 'Brute force'), (SCENARIO_CHUNKED, 'Chunked window')):
        points = [(r.doc_len, r.joules) for r in rows if r.scenario == scenario]
        ax.plot([p[0] for p in points], [p[1] for p in points], marker='o', label=label)
    ax.set_xscale('log', base=2)
    ax.set_yscale('log')
    ax.set_xlabel('Document length (tokens)')
    ax.set_ylabel('Energy (J)')
    ax.set_title('Forward-pass energy')
    ax.legend()
    plt.tight_layout()

    save_path = Path(save_path)
    save_path.parent.mkdir(parents=True, exist_ok=True)
    plt.savefig(save_path, dpi=150, bbox_inches='tight')
    plt.close(fig)
    logger.info(f"Energy plot saved to {save_path}")
    return save_path


# ----------------------------------------------------------------------
# Token ratios from ledgers
# ----------------------------------------------------------------------

LedgerLike = Union[CostLedger, Mapping[str, Any]]


def _token_totals(ledger: LedgerLike) -> Tuple[int, int]:
    if isinstance(ledger, CostLedger):
        return ledger.prompt_tokens, ledger.response_tokens
    return int(ledger['prompt_tokens']), int(ledger['response_tokens'])


@dataclass(frozen=True)
class TokenReport:
    task: str
    prompt_tokens: int
    response_tokens: int
    baseline_prompt_tokens: int
    baseline_response_tokens: int
    ratio: float

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['ratio'] = round(self.ratio, 6)
        return data


def token_report(ledger: LedgerLike, baseline: LedgerLike, task: str = '') -> TokenReport:
    """
    End-to-end tokens of a run against a baseline run of the same task.

    Both arguments take a CostLedger or its snapshot dict.

    Raises:
        DivisionUndefined: if the baseline used no tokens
    """
    prompt, response = _token_totals(ledger)
    base_prompt, base_response = _token_totals(baseline)
    base_total = base_prompt + base_response
    if base_total == 0:
        raise DivisionUndefined(f"baseline ledger for {task or 'task'} has no tokens")
    return TokenReport(task=task, prompt_tokens=prompt, response_tokens=response,
                       baseline_prompt_tokens=base_prompt, baseline_response_tokens=base_response,
                       ratio=(prompt + response) / base_total)


def token_reports(ledgers: Mapping[str, LedgerLike], baselines: Mapping[str, LedgerLike],
                  skip_undefined: bool = True) -> List[TokenReport]:
    """
    Per-task reports over the tasks both mappings share, sorted by task.

    With skip_undefined, tasks whose baseline is empty are logged and left out.
    """
    reports = []
    for task in sorted(set(ledgers) & set(baselines)):
        try:
            reports.append(token_report(ledgers[task], baselines[task], task=task))
        except DivisionUndefined as e:
            if not skip_undefined:
                raise
            logger.warning(f"Skipping {task}: {e}")
    return reports


def mean_ratio(reports: Sequence[TokenReport]) -> Optional[float]:
    if not reports:
        return None
    return float(np.mean([r.ratio for r in reports]))
