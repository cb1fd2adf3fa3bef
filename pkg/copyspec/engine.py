"""Copy-first speculative generation loop.

Each attempt proposes tokens (copied from an earlier occurrence of the last
gamma tokens, drafted by a cheaper model, or nothing), verifies them with one
target pass, keeps the longest agreeing prefix plus one target token, and
rolls the model caches back to the accepted context.
"""

import enum
import logging
import time
from dataclasses import dataclass, field
from multiprocessing import Pool
from typing import List, Optional, Sequence, Tuple

from tqdm import tqdm

from .corpus import EOT_ID, Transcript, Vocabulary, assemble_prompt, tokenize
from .errors import BudgetExhausted, ConfigError, EmptyChunk
from .lm import LangModel
from .match_index import MatchIndex, extract_chunk
from .metrics import CostModel, RunMetrics, score_log

logger = logging.getLogger(__name__)

MAX_DRAFT_LEN = 50


class Strategy(str, enum.Enum):
    BASELINE = "baseline"
    COPY = "copy"
    SPECDEC = "specdec"
    COPY_PLUS_SPECDEC = "copy+specdec"

    @classmethod
    def parse(cls, value) -> "Strategy":
        if isinstance(value, cls):
            return value
        name = str(value).strip().lower().replace("_plus_", "+")
        try:
            return cls(name)
        except ValueError:
            raise ConfigError(f"unknown strategy {value!r}; choose from {[s.value for s in cls]}") from None

    @property
    def uses_copy(self) -> bool:
        return self in (Strategy.COPY, Strategy.COPY_PLUS_SPECDEC)

    @property
    def uses_draft(self) -> bool:
        return self in (Strategy.SPECDEC, Strategy.COPY_PLUS_SPECDEC)


@dataclass(frozen=True)
class EngineConfig:
    gamma: int = 3
    chunk_len: int = 10
    draft_len: int = 3
    strategy: Strategy = Strategy.COPY
    max_new_tokens: int = 1024

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy.parse(self.strategy))
        for name in ("gamma", "chunk_len", "draft_len", "max_new_tokens"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if self.draft_len > MAX_DRAFT_LEN:
            raise ConfigError(f"draft_len must be <= {MAX_DRAFT_LEN}, got {self.draft_len}")


@dataclass(frozen=True)
class AttemptOutcome:
    source: str  # copy | draft | plain
    proposed: int
    accepted_k: int
    bonus: int
    hit_eot: bool = False
    index_ops: int = 0
    rejected: Optional[int] = None  # first rejected proposed token

    @property
    def emitted(self) -> int:
        return self.accepted_k + (0 if self.hit_eot else 1)

    @property
    def scored_tokens(self) -> int:
        return self.proposed + 1

    @property
    def draft_proposed(self) -> int:
        return self.proposed if self.source == "draft" else 0


# ---------------- Session ----------------

class Session:
    def __init__(self, prompt: Sequence[int], target: LangModel, draft: Optional[LangModel],
                 config: EngineConfig, index: Optional[MatchIndex] = None, eot_id: int = EOT_ID):
        if not prompt:
            raise ValueError("prompt must be non-empty")
        self.config = config
        self.target = target
        self.draft = draft
        self.eot_id = eot_id
        self.context: List[int] = list(prompt)
        self.start_len = len(self.context)
        self.log: List[AttemptOutcome] = []
        self.finished = False

        self.index = index
        if config.strategy.uses_copy:
            if self.index is None:
                self.index = MatchIndex(config.gamma)
            elif self.index.gamma != config.gamma:
                raise ConfigError(f"index gamma {self.index.gamma} differs from config gamma {config.gamma}")
            # prompt indexing is not charged to any attempt
            self.index.extend(self.context[self.index.length:], self.context)

        self.target.sync_to(self.context)
        if self.draft is not None:
            self.draft.sync_to(self.context)

    @property
    def output(self) -> List[int]:
        return self.context[self.start_len:]

    @property
    def remaining(self) -> int:
        return self.config.max_new_tokens - (len(self.context) - self.start_len)

    def _copy_proposal(self, cap: int) -> Tuple[List[int], int]:
        cfg = self.config
        if not cfg.strategy.uses_copy or len(self.context) < 2 * cfg.gamma:
            return [], 0
        match = self.index.lookup(self.context)
        if match is None:
            return [], 1
        try:
            return extract_chunk(self.context, match, min(cfg.chunk_len, cap)), 1
        except EmptyChunk:
            return [], 1

    def _draft_proposal(self, cap: int) -> List[int]:
        proposal: List[int] = []
        for _ in range(min(self.config.draft_len, cap)):
            tok = self.draft.next_token()
            proposal.append(tok)
            self.draft.append([tok])
            if tok == self.eot_id:
                break
        return proposal

    def step(self) -> AttemptOutcome:
        if self.finished or self.remaining <= 0:
            self.finished = True
            raise BudgetExhausted("session already finished")
        cap = self.remaining - 1
        ops = 0

        if cap >= 1:
            chunk, ops = self._copy_proposal(cap)
            if chunk:
                return self.verify_block(chunk, "copy", index_ops=ops)
            if self.config.strategy.uses_draft and self.draft is not None:
                return self.verify_block(self._draft_proposal(cap), "draft", index_ops=ops)

        bonus = self.target.next_token()
        return self._commit([], bonus, "plain", proposed=0, index_ops=ops)

    def verify_block(self, proposal: Sequence[int], source: str, index_ops: int = 0) -> AttemptOutcome:
        if not proposal:
            raise ValueError("verify_block needs a non-empty proposal")
        t = len(self.context)
        scores = self.target.score_block(proposal)
        k = 0
        while k < len(proposal) and proposal[k] == scores[k] and proposal[k] != self.eot_id:
            k += 1
        self.target.truncate(t + k)
        if k < len(proposal):
            bonus = scores[k]
        else:
            bonus = self.target.next_token()
        # an agreed <eot> ends the turn as the bonus; it is not a rejection
        rejected = None
        if k < len(proposal) and proposal[k] != scores[k]:
            rejected = proposal[k]
        return self._commit(list(proposal[:k]), bonus, source, proposed=len(proposal),
                            index_ops=index_ops, rejected=rejected)

    def _commit(self, accepted: List[int], bonus: int, source: str, proposed: int,
                index_ops: int = 0, rejected: Optional[int] = None) -> AttemptOutcome:
        hit_eot = bonus == self.eot_id
        new = accepted if hit_eot else accepted + [bonus]
        self.context.extend(new)

        self.target.truncate(len(self.context) - len(new))
        self.target.append(new)
        if self.draft is not None:
            self.draft.sync_to(self.context)
        if self.config.strategy.uses_copy:
            index_ops += self.index.extend(new, self.context)

        outcome = AttemptOutcome(source=source, proposed=proposed, accepted_k=len(accepted),
                                 bonus=bonus, hit_eot=hit_eot, index_ops=index_ops, rejected=rejected)
        self.log.append(outcome)
        logger.debug("attempt %d: %s proposed=%d accepted=%d bonus=%d",
                     len(self.log), source, proposed, len(accepted), bonus)
        if hit_eot or self.remaining <= 0:
            self.finished = True
        return outcome


def generate(prompt: Sequence[int], target: LangModel, draft: Optional[LangModel],
             config: EngineConfig, index: Optional[MatchIndex] = None,
             eot_id: int = EOT_ID) -> Tuple[List[int], List[AttemptOutcome]]:
    session = Session(prompt, target, draft, config, index=index, eot_id=eot_id)
    while not session.finished:
        session.step()
    return session.output, session.log


def greedy_decode(prompt: Sequence[int], target: LangModel, max_new_tokens: int,
                  eot_id: int = EOT_ID) -> List[int]:
    """Token-by-token argmax decoding without any cache or speculation."""
    ctx = list(prompt)
    out: List[int] = []
    while len(out) < max_new_tokens:
        tok = target.argmax_after(ctx)
        if tok == eot_id:
            break
        out.append(tok)
        ctx.append(tok)
    return out


# ---------------- multi-turn harness ----------------

@dataclass
class TurnResult:
    turn: int
    output: List[int]
    log: List[AttemptOutcome]
    metrics: RunMetrics
    context_len: int


@dataclass
class TranscriptResult:
    transcript_id: str
    category: str
    turns: List[TurnResult] = field(default_factory=list)


def run_transcript(transcript: Transcript, vocab: Vocabulary, target: LangModel,
                   draft: Optional[LangModel], config: EngineConfig,
                   cost: Optional[CostModel] = None) -> TranscriptResult:
    """Generates every assistant turn; one index and one pair of caches live for the whole transcript."""
    cost = cost or CostModel()
    target = target.fork()
    draft = draft.fork() if draft is not None and config.strategy.uses_draft else None
    index = MatchIndex(config.gamma) if config.strategy.uses_copy else None

    result = TranscriptResult(transcript.id, transcript.category)
    history: List[Tuple[str, List[int]]] = []
    for turn_no, turn in enumerate(transcript.user_turns, start=1):
        user_ids = tokenize(turn.text, vocab)
        prompt = assemble_prompt(history, user_ids, vocab)
        output, log = generate(prompt, target, draft, config, index=index, eot_id=vocab.eot_id)
        result.turns.append(TurnResult(turn_no, output, log, score_log(log, cost), len(prompt) + len(output)))
        history.append(("user", user_ids))
        history.append(("assistant", output))
    return result


_worker_args = None


def _init_worker(args):
    global _worker_args
    _worker_args = args


def _run_one(transcript: Transcript) -> TranscriptResult:
    vocab, target, draft, config, cost = _worker_args
    return run_transcript(transcript, vocab, target, draft, config, cost)


def run_corpus(transcripts: Sequence[Transcript], vocab: Vocabulary, target: LangModel,
               draft: Optional[LangModel], config: EngineConfig, cost: Optional[CostModel] = None,
               jobs: int = 1, progress: bool = False) -> List[TranscriptResult]:
    cost = cost or CostModel()
    args = (vocab, target, draft, config, cost)
    desc = f"{config.strategy.value} g={config.gamma} m={config.chunk_len}"
    started = time.perf_counter()
    if jobs > 1 and len(transcripts) > 1:
        with Pool(processes=jobs, initializer=_init_worker, initargs=(args,)) as pool:
            it = pool.imap(_run_one, transcripts)
            results = list(tqdm(it, total=len(transcripts), desc=desc, disable=not progress))
    else:
        _init_worker(args)
        results = [_run_one(t) for t in tqdm(transcripts, desc=desc, disable=not progress)]
    logger.info("%s: %d transcripts in %.2fs wall", desc, len(results), time.perf_counter() - started)
    return sorted(results, key=lambda r: r.transcript_id)
