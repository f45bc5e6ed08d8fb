"""Decision loop, fixed-strategy baselines and their shared types."""

from lcboost.engine.baselines import BASELINES, run_baseline
from lcboost.engine.engine import LCBoostEngine, RunState
from lcboost.engine.types import (
    Action,
    AnswerRecord,
    BudgetError,
    EvidenceItem,
    EvidenceState,
    RunError,
    Step,
    StrategyPlan,
    TaskSpec,
    Trajectory,
    TrajectoryError,
)

__all__ = [
    'Action',
    'AnswerRecord',
    'BASELINES',
    'BudgetError',
    'EvidenceItem',
    'EvidenceState',
    'LCBoostEngine',
    'RunError',
    'RunState',
    'Step',
    'StrategyPlan',
    'TaskSpec',
    'Trajectory',
    'TrajectoryError',
    'run_baseline',
]
