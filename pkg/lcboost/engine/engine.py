#!/usr/bin/env python3
"""
The decision loop: decompose, plan, process chunks, answer.

Task Understanding picks one of four processing options; each option then
runs a fixed executor over the chunks:

    1  Retrieve the top-k chunks, scan them in rank order, answer at the first hit
    2  Merge a running summary chunk by chunk, then aggregate
    3  Append key sentences chunk by chunk, then aggregate
    4  Scan chunks in order (reverse for code), answer at the first hit

Every prompt is fitted to the window before it is sent: oversized chunks are
re-decomposed into smaller pieces inside the same step, evidence that would
outgrow its budget is re-compressed, and final contexts are middle-truncated.

The engine keeps no per-run state, so one instance may serve many runs
concurrently as long as each run gets its own gateway ledger.

Usage:
    engine = LCBoostEngine(gateway, config)
    record = engine.run(task, ContextDocument(text))
    print(record.text, record.trajectory.actions())
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from lcboost.config import RunConfig
from lcboost.constants import CATEGORY_CODE, CATEGORY_SYNTHETIC, STRATEGY_LCBOOST, fallback_option
from lcboost.gateway import GatewayError, LLMGateway
from lcboost.prompts import (
    PromptError,
    PromptRegistry,
    TaskExamples,
    Unparseable,
    default_examples,
    default_registry,
    parse_nullable,
    parse_option,
    parse_sentence_ids,
)
from lcboost.retrieval import Scorer, build_index, get_scorer, rank
from lcboost.text_segmentation import (
    Chunk,
    ContextDocument,
    annotate_sentences,
    clip_tokens,
    count_tokens,
    decompose,
    truncate_middle,
)
from lcboost.utils import sha256_text
from lcboost.engine.types import (
    EVIDENCE_JOINER,
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

logger = logging.getLogger(__name__)

# Tokens a one-token piece can occupy once annotated ("[s1] x")
MIN_PIECE_TOKENS = 4

# Ledger roles
ROLE_UNDERSTANDING = 'task_understanding'
ROLE_REWRITE = 'query_rewrite'
ROLE_APPEND = 'append'
ROLE_MERGE = 'merge'
ROLE_SCAN = 'scan'
ROLE_COMPRESS = 'compress'
ROLE_ANSWER = 'answer'
ROLE_AGGREGATION = 'aggregation'


@dataclass(frozen=True)
class Call:
    """One completed gateway call, reduced to what a step records."""
    text: str
    prompt_hash: str
    response_hash: str


@dataclass
class RunState:
    """Everything one run mutates. Never shared between runs."""
    task: TaskSpec
    chunks: List[Chunk]
    trajectory: Trajectory
    evidence: EvidenceState
    query: Optional[str] = None
    description: str = ''
    question: str = ''
    plan: Optional[StrategyPlan] = None

    @property
    def final_question(self) -> str:
        return self.query or self.description


def combine_hashes(hashes: Sequence[str]) -> Optional[str]:
    """Single hash standing for one or more calls of a step."""
    if not hashes:
        return None
    if len(hashes) == 1:
        return hashes[0]
    return sha256_text('\n'.join(hashes))


class LCBoostEngine:
    """Runs tasks over long documents through a short-window gateway."""

    def __init__(self, gateway: LLMGateway, config: RunConfig,
                 registry: Optional[PromptRegistry] = None,
                 examples: Optional[TaskExamples] = None,
                 scorer: Optional[Scorer] = None):
        self.gateway = gateway
        self.config = config
        self.registry = registry or default_registry()
        self.examples = examples or default_examples()
        self.scorer = scorer or get_scorer(config.scorer)
        self.limit = min(config.window, gateway.profile.context_limit)
        self.max_output_tokens = config.max_output_tokens

    # ------------------------------------------------------------------
    # Budget checks and fitting
    # ------------------------------------------------------------------

    def _overhead(self, template: str, **fixed: str) -> int:
        """Tokens of a template with every unbound placeholder empty."""
        bindings = {name: '' for name in self.registry.get(template).required}
        bindings.update(fixed)
        return count_tokens(self.registry.render(template, bindings))

    def check_budgets(self, task: TaskSpec) -> None:
        """
        Verify that every prompt a run of this task can build fits the window.

        Raises:
            BudgetError: naming the first template that cannot fit
        """
        q = self.config.query_budget
        e = self.config.evidence_budget
        out = self.max_output_tokens
        examples = self.examples.understanding_examples(task.category)
        rewrite_examples = self.examples.rewrite_examples(task.category)
        strategy = max((self.examples.strategy(o) for o in (1, 2, 3, 4)), key=count_tokens)
        needs = {
            'task_understanding': self._overhead('task_understanding', examples=examples) + 2 * q,
            'query_rewrite': self._overhead('query_rewrite', examples=rewrite_examples,
                                            strategy=strategy) + 2 * q,
            'append_extract': self._overhead('append_extract') + q + MIN_PIECE_TOKENS,
            'merge_summarize': self._overhead('merge_summarize') + q + e + MIN_PIECE_TOKENS,
            task.scan_prompt: self._overhead(task.scan_prompt) + q + MIN_PIECE_TOKENS,
            'compress': self._overhead('compress', max_tokens=str(e)) + q + MIN_PIECE_TOKENS,
            task.answer_template: self._overhead(task.answer_template) + q + e,
        }
        for template, need in needs.items():
            if need + out > self.limit:
                raise BudgetError(
                    f"template '{template}' needs {need} + {out} output tokens, "
                    f"window is {self.limit}")

    def fits(self, prompt: str, extra: int = 0) -> bool:
        return count_tokens(prompt) + extra + self.max_output_tokens <= self.limit

    def fit_pieces(self, chunk: Chunk, render_piece: Callable[[Chunk], str],
                   extra: int = 0) -> List[Chunk]:
        """
        Split a chunk until every piece's prompt fits the window.

        The piece budget starts at the chunk's own size and halves on each
        failure. `extra` reserves room for content bound after fitting.

        Raises:
            BudgetError: if even one-token pieces do not fit
        """
        budget = max(1, chunk.token_count)
        while True:
            pieces = decompose(ContextDocument(chunk.text), budget)
            if all(self.fits(render_piece(piece), extra) for piece in pieces):
                if len(pieces) > 1:
                    logger.debug(f"chunk {chunk.index} re-decomposed into {len(pieces)} pieces")
                return pieces
            if budget == 1:
                raise BudgetError(f"chunk {chunk.index} cannot fit the window even token by token")
            budget = max(1, budget // 2)

    def fit_context(self, template: str, context: str, bindings: Dict[str, str]) -> str:
        """Middle-truncate a context so the rendered template fits."""
        empty = self.registry.render(template, {**bindings, 'context': ''})
        room = self.limit - self.max_output_tokens - count_tokens(empty)
        if count_tokens(context) <= room:
            return context
        if room < 2:
            raise BudgetError(f"no room for context in template '{template}'")
        logger.warning(f"context truncated to {room} tokens for '{template}'")
        return truncate_middle(ContextDocument(context), room).text

    def clip_query(self, text: Optional[str], what: str = 'query') -> Optional[str]:
        if text is None:
            return None
        if count_tokens(text) <= self.config.query_budget:
            return text
        logger.warning(f"{what} exceeds query_budget ({self.config.query_budget}); middle-truncated")
        return truncate_middle(ContextDocument(text), self.config.query_budget).text

    # ------------------------------------------------------------------
    # Calls and steps
    # ------------------------------------------------------------------

    def call(self, state: RunState, role: str, template: str, bindings: Dict[str, str]) -> Call:
        prompt = self.registry.render(template, bindings)
        request = self.gateway.request(prompt, max_output_tokens=self.max_output_tokens,
                                       temperature=self.config.temperature)
        response = self.gateway.complete(request, role=role)
        call = Call(text=response.text, prompt_hash=sha256_text(prompt),
                    response_hash=sha256_text(response.text))
        return call

    def add_step(self, state: RunState, action: Action, chunk_index: Optional[int] = None,
                 calls: Sequence[Call] = ()) -> Step:
        step = Step(action=action, chunk_index=chunk_index,
                    prompt_hash=combine_hashes([c.prompt_hash for c in calls]),
                    response_hash=combine_hashes([c.response_hash for c in calls]))
        state.trajectory.add(step)
        logger.debug(f"{state.task.name}: {action.value}"
                     + (f" @ chunk {chunk_index}" if chunk_index is not None else ''))
        return step

    def start(self, task: TaskSpec, doc: ContextDocument, planned: bool) -> RunState:
        """Decompose the document and set up the run state."""
        chunks = decompose(doc, self.config.chunk_budget)
        query = self.clip_query(task.query if task.has_query else None)
        description = self.clip_query(task.description, 'task description') or ''
        state = RunState(
            task=task,
            chunks=chunks,
            trajectory=Trajectory(planned=planned),
            evidence=EvidenceState(budget=self.config.evidence_budget),
            query=query,
            description=description,
        )
        state.question = state.final_question
        logger.info(f"{task.name}: {doc.token_count} tokens in {len(chunks)} chunks")
        return state

    def snapshot(self) -> Dict:
        return self.gateway.ledger.snapshot(self.gateway.profile, self.config.token_calibration)

    def record(self, state: RunState, text: str, strategy: str,
               low_confidence: bool = False) -> AnswerRecord:
        state.trajectory.validate()
        return AnswerRecord(
            task=state.task.name,
            strategy=strategy,
            text=text,
            trajectory=state.trajectory,
            ledger=self.snapshot(),
            plan=state.plan,
            low_confidence=low_confidence,
        )

    def guarded(self, state: RunState, body: Callable[[], AnswerRecord]) -> AnswerRecord:
        """Run body, wrapping failures in RunError with the partial trajectory."""
        try:
            return body()
        except (GatewayError, PromptError, BudgetError, TrajectoryError) as e:
            logger.error(f"{state.task.name}: run failed after {len(state.trajectory.steps)} steps: {e}")
            raise RunError(f"{state.task.name}: {e}", state.trajectory, self.snapshot()) from e

    # ------------------------------------------------------------------
    # Actions
    # ------------------------------------------------------------------

    def task_understanding(self, state: RunState) -> StrategyPlan:
        """
        Choose a processing option; for synthetic tasks also rewrite the query.

        An unparseable option is asked for once more, then replaced by the
        fallback option (1 with a query, 2 without).
        """
        task = state.task
        if not state.chunks:
            raise ValueError("task understanding needs at least one chunk")

        bindings = {
            'task_prompt': state.description,
            'input_query': state.query,
            'examples': self.examples.understanding_examples(task.category),
        }
        calls = []
        option = None
        fallback = False
        for attempt in (1, 2):
            reply = self.call(state, ROLE_UNDERSTANDING, 'task_understanding', bindings)
            calls.append(reply)
            try:
                option = parse_option(reply.text).option
                break
            except Unparseable:
                logger.warning(f"{task.name}: unparseable option reply (attempt {attempt}): "
                               f"{reply.text[:60]!r}")
        if option is None:
            option = fallback_option(state.query is not None)
            fallback = True
            logger.warning(f"{task.name}: falling back to option {option}")

        rewritten = None
        if task.category == CATEGORY_SYNTHETIC and state.query is not None:
            reply = self.call(state, ROLE_REWRITE, 'query_rewrite', {
                'task_prompt': state.description,
                'input_query': state.query,
                'strategy': self.examples.strategy(option),
                'examples': self.examples.rewrite_examples(task.category),
            })
            calls.append(reply)
            parsed = parse_nullable(reply.text)
            if parsed:
                rewritten = self.clip_query(parsed, 'rewritten query')

        plan = StrategyPlan(option=option, rewritten_query=rewritten, fallback=fallback)
        state.plan = plan
        if rewritten:
            state.question = rewritten
        self.add_step(state, Action.TASK_UNDERSTANDING, calls=calls)
        logger.info(f"{task.name}: option {option} ({plan.executor})"
                    + (f", query rewritten to {rewritten!r}" if rewritten else ''))
        return plan

    @staticmethod
    def select_action(plan: StrategyPlan, extraction: Optional[str]) -> Action:
        """
        Rule-driven action for one processed chunk.

        A NULL or empty extraction is a Move; otherwise the plan decides.
        """
        if not extraction:
            return Action.MOVE
        if plan.option == 3:
            return Action.APPEND
        if plan.option == 2:
            return Action.MERGE
        return Action.ANSWER

    def do_retrieve(self, state: RunState, k: int) -> List[int]:
        """Top-k chunk indices for the current question, best first."""
        index = build_index(state.chunks)
        ranked = rank(index, state.question, k, scorer=self.scorer)
        return [r.chunk_index for r in ranked]

    def _compress(self, state: RunState, notes: str, target: int) -> Tuple[str, List[Call]]:
        """Re-compress evidence notes to at most `target` tokens."""
        question = state.question

        def render_piece(piece: Chunk) -> str:
            return self.registry.render('compress', {
                'notes': piece.text, 'question': question, 'max_tokens': str(target)})

        notes_chunk = Chunk(index=0, text=notes, char_span=(0, len(notes)),
                            token_count=count_tokens(notes))
        pieces = self.fit_pieces(notes_chunk, render_piece)
        per_piece = max(1, target // len(pieces))
        calls = []
        outputs = []
        for piece in pieces:
            reply = self.call(state, ROLE_COMPRESS, 'compress', {
                'notes': piece.text, 'question': question, 'max_tokens': str(per_piece)})
            calls.append(reply)
            if reply.text.strip():
                outputs.append(reply.text.strip())
        return clip_tokens(EVIDENCE_JOINER.join(outputs), target), calls

    def _compress_target(self) -> int:
        return max(1, self.config.evidence_budget // 2)

    def absorb_item(self, state: RunState, chunk_index: int, text: str) -> List[Call]:
        """Add an evidence item, re-compressing all evidence on overflow."""
        evidence = state.evidence
        item = EvidenceItem(chunk_index=chunk_index, text=text)
        if evidence.token_total + item.token_count <= evidence.budget:
            evidence.add_item(item)
            return []

        logger.warning(f"{state.task.name}: evidence over budget at chunk {chunk_index}; re-compressing")
        notes = EVIDENCE_JOINER.join(p for p in (evidence.context(), text) if p)
        first = min([i.chunk_index for i in evidence.items] + [chunk_index])
        compressed, calls = self._compress(state, notes, self._compress_target())
        evidence.set_summary(None)
        evidence.replace_items([EvidenceItem(chunk_index=first, text=compressed)])
        return calls

    def absorb_summary(self, state: RunState, supplement: str) -> List[Call]:
        """Extend the merged summary, re-compressing all evidence on overflow."""
        evidence = state.evidence
        previous = evidence.merged_summary
        summary = f"{previous}{EVIDENCE_JOINER}{supplement}" if previous else supplement
        growth = count_tokens(summary) - (count_tokens(previous) if previous else 0)
        if evidence.token_total + growth <= evidence.budget:
            evidence.set_summary(summary)
            return []

        logger.warning(f"{state.task.name}: summary over budget; re-compressing")
        notes = EVIDENCE_JOINER.join(p for p in (evidence.item_text(), summary) if p)
        compressed, calls = self._compress(state, notes, self._compress_target())
        evidence.replace_items([])
        evidence.set_summary(compressed)
        return calls

    def do_append(self, state: RunState, chunk: Chunk) -> Tuple[Optional[str], List[Call]]:
        """
        Extract key sentences of one chunk and append them as one evidence item.

        Returns:
            (extracted text or None, calls made)
        """
        question = state.question

        def render_piece(piece: Chunk) -> str:
            return self.registry.render('append_extract', {
                'article': annotate_sentences(piece).render(), 'question': question})

        calls = []
        texts = []
        for piece in self.fit_pieces(chunk, render_piece):
            annotated = annotate_sentences(piece)
            reply = self.call(state, ROLE_APPEND, 'append_extract', {
                'article': annotated.render(), 'question': question})
            calls.append(reply)
            for identifier in parse_sentence_ids(reply.text) or []:
                sentence = annotated.sentence_text(identifier)
                if sentence:
                    texts.append(sentence)

        if not texts:
            return None, calls
        extracted = EVIDENCE_JOINER.join(texts)
        calls.extend(self.absorb_item(state, chunk.index, extracted))
        return extracted, calls

    def do_merge(self, state: RunState, chunk: Chunk) -> Tuple[Optional[str], List[Call]]:
        """
        Summarize one chunk against the running summary and merge the supplement.

        Returns:
            (supplement text or None, calls made)
        """
        question = state.question

        def render_piece(piece: Chunk) -> str:
            return self.registry.render('merge_summarize', {
                'article': piece.text, 'previous_sum': '', 'question': question})

        calls = []
        supplements = []
        pieces = self.fit_pieces(chunk, render_piece, extra=self.config.evidence_budget)
        for piece in pieces:
            reply = self.call(state, ROLE_MERGE, 'merge_summarize', {
                'article': piece.text,
                'previous_sum': state.evidence.merged_summary or '',
                'question': question,
            })
            calls.append(reply)
            supplement = parse_nullable(reply.text)
            if supplement:
                supplements.append(supplement)
                calls.extend(self.absorb_summary(state, supplement))

        if not supplements:
            return None, calls
        return EVIDENCE_JOINER.join(supplements), calls

    def do_scan(self, state: RunState, chunk: Chunk) -> Tuple[Optional[str], List[Call]]:
        """Ask the answer-or-null prompt over one chunk; first non-null piece wins."""
        template = state.task.scan_prompt
        question = state.question

        def render_piece(piece: Chunk) -> str:
            return self.registry.render(template, {'context': piece.text, 'question': question})

        calls = []
        for piece in self.fit_pieces(chunk, render_piece):
            reply = self.call(state, ROLE_SCAN, template, {'context': piece.text, 'question': question})
            calls.append(reply)
            answer = parse_nullable(reply.text)
            if answer:
                return answer, calls
        return None, calls

    def finalize_answer(self, state: RunState, terminal: Action, strategy: str = STRATEGY_LCBOOST,
                        context: Optional[str] = None, low_confidence: bool = False) -> AnswerRecord:
        """
        Render the task's answer prompt over the evidence and record the terminal step.

        Args:
            terminal: Action.ANSWER or Action.AGGREGATION
            context: Overrides the evidence context (e.g. a retrieved chunk)
        """
        task = state.task
        if context is None:
            context = state.evidence.context()
        bindings = {'question': state.final_question}
        context = self.fit_context(task.answer_template, context, bindings)
        role = ROLE_AGGREGATION if terminal == Action.AGGREGATION else ROLE_ANSWER
        reply = self.call(state, role, task.answer_template, {**bindings, 'context': context})
        self.add_step(state, terminal, calls=[reply])
        if low_confidence:
            logger.warning(f"{task.name}: answered without evidence (low confidence)")
        return self.record(state, reply.text.strip(), strategy, low_confidence)

    # ------------------------------------------------------------------
    # Executors
    # ------------------------------------------------------------------

    def chunk_order(self, state: RunState) -> List[int]:
        order = list(range(len(state.chunks)))
        if state.task.category == CATEGORY_CODE:
            order.reverse()
        return order

    def scan_until_answer(self, state: RunState, order: Sequence[int]) -> Optional[AnswerRecord]:
        """Scan chunks in order; record Move per miss and Answer at the first hit."""
        for index in order:
            answer, calls = self.do_scan(state, state.chunks[index])
            action = self.select_action(state.plan, answer)
            self.add_step(state, action, index, calls)
            if action == Action.ANSWER:
                return self.record(state, answer, STRATEGY_LCBOOST)
        return None

    def retrieve_then_answer(self, state: RunState) -> AnswerRecord:
        ranked = self.do_retrieve(state, self.config.top_k)
        state.trajectory.set_visit_order(ranked)
        self.add_step(state, Action.RETRIEVE)
        found = self.scan_until_answer(state, ranked)
        if found is not None:
            return found
        # No retrieved chunk answered: fall back to the best one as context
        return self.finalize_answer(state, Action.ANSWER, context=state.chunks[ranked[0]].text,
                                    low_confidence=True)

    def scan_sequentially(self, state: RunState) -> AnswerRecord:
        order = self.chunk_order(state)
        state.trajectory.set_visit_order(order)
        found = self.scan_until_answer(state, order)
        if found is not None:
            return found
        return self.finalize_answer(state, Action.ANSWER, context='', low_confidence=True)

    def accumulate_then_aggregate(self, state: RunState) -> AnswerRecord:
        order = self.chunk_order(state)
        state.trajectory.set_visit_order(order)
        process = self.do_append if state.plan.option == 3 else self.do_merge
        for index in order:
            extraction, calls = process(state, state.chunks[index])
            self.add_step(state, self.select_action(state.plan, extraction), index, calls)
        return self.finalize_answer(state, Action.AGGREGATION,
                                    low_confidence=state.evidence.is_empty)

    def run(self, task: TaskSpec, doc: ContextDocument) -> AnswerRecord:
        """
        Solve one task over one document.

        Raises:
            RunError: wrapping gateway, prompt and budget failures, with the
                trajectory up to the failure and the ledger snapshot
        """
        state = self.start(task, doc, planned=True)

        def body() -> AnswerRecord:
            self.check_budgets(task)
            plan = self.task_understanding(state)
            if plan.option == 1:
                record = self.retrieve_then_answer(state)
            elif plan.option == 4:
                record = self.scan_sequentially(state)
            else:
                record = self.accumulate_then_aggregate(state)
            logger.info(f"{task.name}: {record.terminal.value} after "
                        f"{len(record.trajectory.steps)} steps, "
                        f"{record.ledger['total_tokens']} tokens")
            return record

        return self.guarded(state, body)
