#!/usr/bin/env python3
"""
Data types shared by the engine and the baselines.

Actions, plans, evidence, trajectories, task specs and answer records, plus
the engine's error types.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence

from lcboost.constants import PLAN_OPTIONS, TASK_CATEGORIES, CATEGORY_CODE
from lcboost.text_segmentation import count_tokens

EVIDENCE_JOINER = '\n'


class Action(str, Enum):
    """The seven named actions."""
    TASK_UNDERSTANDING = "TaskUnderstanding"
    RETRIEVE = "Retrieve"
    MOVE = "Move"
    APPEND = "Append"
    MERGE = "Merge"
    ANSWER = "Answer"
    AGGREGATION = "Aggregation"


TERMINAL_ACTIONS = frozenset({Action.ANSWER, Action.AGGREGATION})

# Actions that must be bound to a chunk
CHUNK_ACTIONS = frozenset({Action.MOVE, Action.APPEND, Action.MERGE})


class TrajectoryError(ValueError):
    """A step sequence breaks the trajectory rules."""


class BudgetError(ValueError):
    """The configured window cannot hold a required prompt."""


class RunError(Exception):
    """
    A run failed part-way.

    Carries the trajectory up to the failure point and the ledger snapshot.
    """

    def __init__(self, message: str, trajectory: 'Trajectory', ledger: Dict[str, Any]):
        super().__init__(message)
        self.trajectory = trajectory
        self.ledger = ledger


@dataclass(frozen=True)
class StrategyPlan:
    """Processing option chosen by Task Understanding."""
    option: int
    rewritten_query: Optional[str] = None
    fallback: bool = False

    EXECUTORS = {
        1: 'retrieve_then_answer',
        2: 'merge_summarize_aggregate',
        3: 'append_extract_aggregate',
        4: 'scan_until_answer',
    }

    def __post_init__(self):
        if self.option not in PLAN_OPTIONS:
            raise ValueError(f"plan option must be one of {PLAN_OPTIONS}, got {self.option}")

    @property
    def executor(self) -> str:
        return self.EXECUTORS[self.option]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'option': self.option,
            'executor': self.executor,
            'rewritten_query': self.rewritten_query,
            'fallback': self.fallback,
        }


@dataclass(frozen=True)
class EvidenceItem:
    chunk_index: int
    text: str

    @property
    def token_count(self) -> int:
        return count_tokens(self.text)


@dataclass
class EvidenceState:
    """
    Accumulated evidence: appended items plus a merged summary.

    token_total never exceeds budget; mutators raise BudgetError instead.
    """
    budget: int
    items: List[EvidenceItem] = field(default_factory=list)
    merged_summary: Optional[str] = None

    @property
    def token_total(self) -> int:
        total = sum(item.token_count for item in self.items)
        if self.merged_summary:
            total += count_tokens(self.merged_summary)
        return total

    @property
    def is_empty(self) -> bool:
        return not self.items and not self.merged_summary

    def _check(self, extra: int) -> None:
        if self.token_total + extra > self.budget:
            raise BudgetError(f"evidence would reach {self.token_total + extra} tokens "
                              f"(budget {self.budget})")

    def add_item(self, item: EvidenceItem) -> None:
        self._check(item.token_count)
        self.items.append(item)

    def replace_items(self, items: Sequence[EvidenceItem]) -> None:
        old = self.items
        self.items = []
        try:
            for item in items:
                self.add_item(item)
        except BudgetError:
            self.items = old
            raise

    def set_summary(self, summary: Optional[str]) -> None:
        new = count_tokens(summary) if summary else 0
        old = count_tokens(self.merged_summary) if self.merged_summary else 0
        self._check(new - old)
        self.merged_summary = summary or None

    def item_text(self) -> str:
        """Items in source-chunk order, joined by newlines."""
        ordered = sorted(self.items, key=lambda item: item.chunk_index)
        return EVIDENCE_JOINER.join(item.text for item in ordered)

    def context(self) -> str:
        """Surrogate context for the final prompt: summary first, then items."""
        parts = []
        if self.merged_summary:
            parts.append(self.merged_summary)
        if self.items:
            parts.append(self.item_text())
        return EVIDENCE_JOINER.join(parts)


@dataclass(frozen=True)
class Step:
    action: Action
    chunk_index: Optional[int] = None
    prompt_hash: Optional[str] = None
    response_hash: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            'action': self.action.value,
            'chunk': self.chunk_index,
            'prompt_hash': self.prompt_hash,
            'response_hash': self.response_hash,
        }


@dataclass
class Trajectory:
    """
    Ordered, validated record of a run.

    Planned runs start with TaskUnderstanding. Chunk-bound steps follow the
    run's visit order (forward, reverse or retrieval rank) strictly, and
    nothing may follow a terminal action. Rules are checked on every add,
    so an error-terminated trajectory is valid up to its last step.
    """
    planned: bool = True
    visit_order: Optional[List[int]] = None
    steps: List[Step] = field(default_factory=list)

    def set_visit_order(self, order: Sequence[int]) -> None:
        if len(set(order)) != len(order):
            raise TrajectoryError(f"visit order repeats a chunk: {list(order)}")
        self.visit_order = list(order)

    @property
    def terminal(self) -> Optional[Action]:
        if self.steps and self.steps[-1].action in TERMINAL_ACTIONS:
            return self.steps[-1].action
        return None

    def _last_position(self) -> int:
        positions = {c: i for i, c in enumerate(self.visit_order or [])}
        last = -1
        for step in self.steps:
            if step.chunk_index is not None:
                last = positions[step.chunk_index]
        return last

    def add(self, step: Step) -> None:
        if self.terminal is not None:
            raise TrajectoryError(f"step {step.action.value} after terminal {self.terminal.value}")
        if not self.steps and self.planned and step.action != Action.TASK_UNDERSTANDING:
            raise TrajectoryError(f"planned run must start with TaskUnderstanding, got {step.action.value}")
        if self.steps and step.action == Action.TASK_UNDERSTANDING:
            raise TrajectoryError("TaskUnderstanding may only be the first step")
        if step.action in CHUNK_ACTIONS and step.chunk_index is None:
            raise TrajectoryError(f"{step.action.value} needs a chunk index")
        if step.chunk_index is not None:
            if self.visit_order is None or step.chunk_index not in self.visit_order:
                raise TrajectoryError(f"chunk {step.chunk_index} is not in the visit order")
            position = self.visit_order.index(step.chunk_index)
            if position <= self._last_position():
                raise TrajectoryError(f"chunk {step.chunk_index} visited out of order")
        self.steps.append(step)

    def validate(self) -> None:
        """Full check of a finished trajectory."""
        replay = Trajectory(planned=self.planned, visit_order=self.visit_order)
        for step in self.steps:
            replay.add(step)
        if replay.terminal is None:
            raise TrajectoryError("trajectory does not end with Answer or Aggregation")

    def actions(self) -> List[Action]:
        return [step.action for step in self.steps]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'planned': self.planned,
            'visit_order': self.visit_order,
            'steps': [step.to_dict() for step in self.steps],
            'terminal': self.terminal.value if self.terminal else None,
        }


@dataclass(frozen=True)
class TaskSpec:
    """One task: what to answer and with which prompts."""
    name: str
    category: str
    answer_template: str
    query: Optional[str] = None
    description: str = ''
    scan_template: Optional[str] = None

    def __post_init__(self):
        if self.category not in TASK_CATEGORIES:
            raise ValueError(f"category must be one of {TASK_CATEGORIES}, got {self.category!r}")

    @property
    def has_query(self) -> bool:
        return bool(self.query and self.query.strip())

    @property
    def scan_prompt(self) -> str:
        if self.scan_template:
            return self.scan_template
        return 'code_scan' if self.category == CATEGORY_CODE else 'scan_answer'

    def templates(self) -> List[str]:
        return [self.answer_template, self.scan_prompt]


@dataclass
class AnswerRecord:
    """Final answer of one run with its trajectory and ledger snapshot."""
    task: str
    strategy: str
    text: str
    trajectory: Trajectory
    ledger: Dict[str, Any]
    plan: Optional[StrategyPlan] = None
    low_confidence: bool = False

    @property
    def terminal(self) -> Optional[Action]:
        return self.trajectory.terminal

    def to_dict(self) -> Dict[str, Any]:
        trajectory = self.trajectory.to_dict()
        return {
            'task': self.task,
            'strategy': self.strategy,
            'plan': self.plan.to_dict() if self.plan else None,
            'steps': trajectory['steps'],
            'visit_order': trajectory['visit_order'],
            'terminal': trajectory['terminal'],
            'answer': self.text,
            'low_confidence': self.low_confidence,
            'ledger': self.ledger,
        }
