#!/usr/bin/env python3
"""
Fixed-strategy baselines for the ablation study.

Each baseline replaces Task Understanding with a strategy fixed by name and
reuses the engine's primitives, so prompts, fitting and ledgers are exactly
those of a planned run. All finish with Aggregation for summarization tasks
and Answer otherwise.

Call patterns (n chunks, k = top_k):

    retrieve_only   Retrieve, 1 answer call over the top chunk
    merge_only      n merge calls (every chunk recorded as Merge), 1 final call
    append_only     n append calls (every chunk recorded as Append), 1 final call
    merge_move      n merge calls, NULL replies recorded as Move, 1 final call
    append_move     n append calls, NULL replies recorded as Move, 1 final call
    retrieve_move   Retrieve, min(k, n) append calls in rank order with Move, 1 final call
    brute_force     1 call over the middle-truncated document
    random          per chunk one of Append/Merge/Move (seeded), 1 final call

Compression calls, when evidence overflows, come on top of these.

Usage:
    record = run_baseline(engine, 'append_move', task, doc)
"""

import logging
import random
from typing import Callable, Dict, Optional

from lcboost.constants import CATEGORY_SUMMARIZATION
from lcboost.text_segmentation import ContextDocument, count_tokens, truncate_middle
from lcboost.engine.engine import LCBoostEngine, RunState
from lcboost.engine.types import Action, AnswerRecord, BudgetError, TaskSpec

logger = logging.getLogger(__name__)

RANDOM_ACTIONS = (Action.APPEND, Action.MERGE, Action.MOVE)


def terminal_for(task: TaskSpec) -> Action:
    return Action.AGGREGATION if task.category == CATEGORY_SUMMARIZATION else Action.ANSWER


def _process_all(engine: LCBoostEngine, state: RunState, action: Action, allow_move: bool) -> None:
    order = engine.chunk_order(state)
    state.trajectory.set_visit_order(order)
    process = engine.do_append if action == Action.APPEND else engine.do_merge
    for index in order:
        extraction, calls = process(state, state.chunks[index])
        recorded = Action.MOVE if allow_move and not extraction else action
        engine.add_step(state, recorded, index, calls)


def _finish(engine: LCBoostEngine, state: RunState, name: str) -> AnswerRecord:
    return engine.finalize_answer(state, terminal_for(state.task), strategy=name,
                                  low_confidence=state.evidence.is_empty)


def retrieve_only(engine: LCBoostEngine, state: RunState, seed: Optional[int]) -> AnswerRecord:
    top = engine.do_retrieve(state, 1)
    state.trajectory.set_visit_order(top)
    engine.add_step(state, Action.RETRIEVE)
    return engine.finalize_answer(state, terminal_for(state.task), strategy='retrieve_only',
                                  context=state.chunks[top[0]].text)


def merge_only(engine: LCBoostEngine, state: RunState, seed: Optional[int]) -> AnswerRecord:
    _process_all(engine, state, Action.MERGE, allow_move=False)
    return _finish(engine, state, 'merge_only')


def append_only(engine: LCBoostEngine, state: RunState, seed: Optional[int]) -> AnswerRecord:
    _process_all(engine, state, Action.APPEND, allow_move=False)
    return _finish(engine, state, 'append_only')


def merge_move(engine: LCBoostEngine, state: RunState, seed: Optional[int]) -> AnswerRecord:
    _process_all(engine, state, Action.MERGE, allow_move=True)
    return _finish(engine, state, 'merge_move')


def append_move(engine: LCBoostEngine, state: RunState, seed: Optional[int]) -> AnswerRecord:
    _process_all(engine, state, Action.APPEND, allow_move=True)
    return _finish(engine, state, 'append_move')


def retrieve_move(engine: LCBoostEngine, state: RunState, seed: Optional[int]) -> AnswerRecord:
    ranked = engine.do_retrieve(state, engine.config.top_k)
    state.trajectory.set_visit_order(ranked)
    engine.add_step(state, Action.RETRIEVE)
    for index in ranked:
        extraction, calls = engine.do_append(state, state.chunks[index])
        engine.add_step(state, Action.APPEND if extraction else Action.MOVE, index, calls)
    return _finish(engine, state, 'retrieve_move')


def brute_force(engine: LCBoostEngine, state: RunState, seed: Optional[int]) -> AnswerRecord:
    """One call over the whole document, middle-truncated to what the window holds."""
    task = state.task
    text = ''.join(chunk.text for chunk in state.chunks)
    empty = engine.registry.render(task.answer_template,
                                   {'context': '', 'question': state.final_question})
    room = engine.limit - engine.max_output_tokens - count_tokens(empty)
    limit = min(engine.config.window - engine.config.prompt_reserve, room)
    if limit < 2:
        raise BudgetError(f"no room for a brute-force context (limit {limit})")
    doc = ContextDocument(text)
    if doc.token_count > limit:
        logger.info(f"{task.name}: brute force keeps {limit} of {doc.token_count} tokens")
        doc = truncate_middle(doc, limit)
    return engine.finalize_answer(state, terminal_for(task), strategy='brute_force', context=doc.text)


def random_actions(engine: LCBoostEngine, state: RunState, seed: Optional[int]) -> AnswerRecord:
    rng = random.Random(engine.config.seed if seed is None else seed)
    order = engine.chunk_order(state)
    state.trajectory.set_visit_order(order)
    for index in order:
        action = rng.choice(RANDOM_ACTIONS)
        calls = []
        if action == Action.APPEND:
            _, calls = engine.do_append(state, state.chunks[index])
        elif action == Action.MERGE:
            _, calls = engine.do_merge(state, state.chunks[index])
        engine.add_step(state, action, index, calls)
    return _finish(engine, state, 'random')


BASELINES: Dict[str, Callable[[LCBoostEngine, RunState, Optional[int]], AnswerRecord]] = {
    'retrieve_only': retrieve_only,
    'merge_only': merge_only,
    'append_only': append_only,
    'merge_move': merge_move,
    'append_move': append_move,
    'retrieve_move': retrieve_move,
    'brute_force': brute_force,
    'random': random_actions,
}


def run_baseline(engine: LCBoostEngine, name: str, task: TaskSpec, doc: ContextDocument,
                 seed: Optional[int] = None) -> AnswerRecord:
    """
    Run one fixed strategy.

    Args:
        engine: Engine whose primitives and gateway the baseline uses
        name: One of BASELINE_NAMES
        task: Task to solve
        doc: Long document
        seed: Seed for 'random' (config.seed when None)

    Raises:
        KeyError: for an unknown strategy name
        RunError: as LCBoostEngine.run
    """
    if name not in BASELINES:
        raise KeyError(f"Unknown strategy '{name}'. Available: {list(BASELINES)}")
    state = engine.start(task, doc, planned=False)

    def body() -> AnswerRecord:
        engine.check_budgets(task)
        record = BASELINES[name](engine, state, seed)
        logger.info(f"{task.name}: {name} finished with {record.ledger['calls']} calls")
        return record

    return engine.guarded(state, body)
