"""Deterministic next-token models with a KV-cache-like state.

A model holds the token prefix it has "cached". score_block scores a whole
block against that prefix in one call and appends it; callers roll rejected
tokens back with truncate. Scores depend only on the prefix, never on the
order of append/truncate calls that produced it.
"""

import copy
import json
import logging
from abc import ABC, abstractmethod
from collections import defaultdict
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .corpus import EOT_ID, atomic_write_text
from .errors import InvalidToken, ModelFormatError, TruncateBeyondState

logger = logging.getLogger(__name__)

KGRAM_FORMAT = "copyspec-kgram"
KGRAM_VERSION = 1

Context = Tuple[int, ...]


class LangModel(ABC):
    def __init__(self, vocab_size: int):
        if vocab_size < 1:
            raise ValueError(f"vocab_size must be positive, got {vocab_size}")
        self.vocab_size = vocab_size
        self._state: List[int] = []
        self.blocks_scored = 0
        self.tokens_scored = 0

    # ---------------- model-specific ----------------

    @abstractmethod
    def argmax_after(self, prefix: Sequence[int]) -> int:
        """Greedy next token after an arbitrary prefix (stateless)."""

    @abstractmethod
    def distribution_after(self, prefix: Sequence[int]) -> np.ndarray:
        """Normalized next-token distribution, shape (vocab_size,)."""

    # ---------------- cached state ----------------

    @property
    def state(self) -> Tuple[int, ...]:
        return tuple(self._state)

    @property
    def state_len(self) -> int:
        return len(self._state)

    def fork(self) -> "LangModel":
        """Same trained tables, empty cache and counters."""
        twin = copy.copy(self)
        twin._state = []
        twin.blocks_scored = 0
        twin.tokens_scored = 0
        return twin

    def _check(self, tokens: Sequence[int]) -> None:
        for tok in tokens:
            if not 0 <= tok < self.vocab_size:
                raise InvalidToken(tok, self.vocab_size)

    def append(self, tokens: Sequence[int]) -> None:
        self._check(tokens)
        self._state.extend(tokens)

    def truncate(self, keep_len: int) -> None:
        if keep_len < 0 or keep_len > len(self._state):
            raise TruncateBeyondState(keep_len, len(self._state))
        del self._state[keep_len:]

    def sync_to(self, context: Sequence[int]) -> None:
        """Keep the longest cached prefix shared with context, then append the rest."""
        n = 0
        limit = min(len(self._state), len(context))
        while n < limit and self._state[n] == context[n]:
            n += 1
        self.truncate(n)
        self.append(context[n:])

    def score_block(self, block: Sequence[int]) -> List[int]:
        """Argmax at every block position given cached prefix + block[:i]; appends block."""
        if not block:
            raise ValueError("score_block needs a non-empty block")
        self._check(block)
        out = []
        for tok in block:
            out.append(self.argmax_after(self._state))
            self._state.append(tok)
        self.blocks_scored += 1
        self.tokens_scored += len(block)
        return out

    def next_token(self) -> int:
        self.tokens_scored += 1
        return self.argmax_after(self._state)


# ---------------- TableLM ----------------

class TableLM(LangModel):
    """Lookup table on the last `order` tokens; anything else maps to fallback."""

    def __init__(self, order: int, table: Dict[Context, int], fallback: int, vocab_size: int):
        super().__init__(vocab_size)
        if order < 1:
            raise ValueError(f"order must be >= 1, got {order}")
        self.order = order
        self.table = {tuple(k): v for k, v in table.items()}
        self.fallback = fallback
        self._check([fallback, *self.table.values()])

    def argmax_after(self, prefix: Sequence[int]) -> int:
        if len(prefix) < self.order:
            return self.fallback
        return self.table.get(tuple(prefix[len(prefix) - self.order:]), self.fallback)

    def distribution_after(self, prefix: Sequence[int]) -> np.ndarray:
        dist = np.zeros(self.vocab_size)
        dist[self.argmax_after(prefix)] = 1.0
        return dist


# ---------------- KgramLM ----------------

class KgramLM(LangModel):
    """Count-based model over contexts of length 0..order with backoff.

    The longest context suffix that was seen in training decides; among
    equally frequent next tokens the smallest id wins.
    """

    def __init__(self, order: int, counts: Dict[Context, Dict[int, int]], vocab_size: int,
                 symbols: Optional[List[str]] = None):
        super().__init__(vocab_size)
        if order < 0:
            raise ValueError(f"order must be >= 0, got {order}")
        self.order = order
        self.counts = counts
        self.symbols = symbols
        self._best = {
            ctx: min(hist.items(), key=lambda kv: (-kv[1], kv[0]))[0]
            for ctx, hist in counts.items() if hist
        }

    def _backoff(self, prefix: Sequence[int]) -> Optional[Context]:
        for n in range(min(self.order, len(prefix)), -1, -1):
            ctx = tuple(prefix[len(prefix) - n:])
            if ctx in self._best:
                return ctx
        return None

    def argmax_after(self, prefix: Sequence[int]) -> int:
        ctx = self._backoff(prefix)
        return EOT_ID if ctx is None else self._best[ctx]

    def distribution_after(self, prefix: Sequence[int]) -> np.ndarray:
        dist = np.zeros(self.vocab_size)
        ctx = self._backoff(prefix)
        if ctx is None:
            dist[EOT_ID] = 1.0
            return dist
        for tok, c in self.counts[ctx].items():
            dist[tok] = c
        return dist / dist.sum()


def train_kgram(corpus: Sequence[Sequence[int]], k: int, vocab_size: Optional[int] = None,
                symbols: Optional[List[str]] = None) -> KgramLM:
    if not corpus:
        raise ValueError("train_kgram needs a non-empty corpus")
    counts: Dict[Context, Dict[int, int]] = defaultdict(lambda: defaultdict(int))
    max_tok = -1
    for seq in corpus:
        for i, nxt in enumerate(seq):
            max_tok = max(max_tok, nxt)
            for n in range(min(k, i) + 1):
                counts[tuple(seq[i - n:i])][nxt] += 1
    if vocab_size is None:
        vocab_size = len(symbols) if symbols is not None else max_tok + 1
    frozen = {ctx: dict(hist) for ctx, hist in counts.items()}
    logger.info("Trained order-%d k-gram model: %d contexts, vocab %d", k, len(frozen), vocab_size)
    return KgramLM(k, frozen, max(vocab_size, 1), symbols)


# ---------------- persistence ----------------

def save_kgram(model: KgramLM, path) -> None:
    payload = {
        "format": KGRAM_FORMAT,
        "version": KGRAM_VERSION,
        "order": model.order,
        "vocab_size": model.vocab_size,
        "symbols": model.symbols,
        "counts": [
            [list(ctx), sorted([tok, c] for tok, c in model.counts[ctx].items())]
            for ctx in sorted(model.counts, key=lambda c: (len(c), c))
        ],
    }
    atomic_write_text(path, json.dumps(payload, ensure_ascii=False) + "\n")


def load_kgram(path) -> KgramLM:
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ModelFormatError(f"{path}: not a JSON model dump ({e.msg})") from e
    if not isinstance(payload, dict) or payload.get("format") != KGRAM_FORMAT:
        raise ModelFormatError(f"{path}: unknown model format")
    if payload.get("version") != KGRAM_VERSION:
        raise ModelFormatError(f"{path}: unsupported version {payload.get('version')!r}")
    try:
        counts = {
            tuple(ctx): {int(tok): int(c) for tok, c in hist}
            for ctx, hist in payload["counts"]
        }
        model = KgramLM(int(payload["order"]), counts, int(payload["vocab_size"]), payload.get("symbols"))
    except (KeyError, TypeError, ValueError) as e:
        raise ModelFormatError(f"{path}: malformed model dump ({e})") from e
    logger.info("Loaded order-%d k-gram model from %s", model.order, path)
    return model
