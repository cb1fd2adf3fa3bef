"""Index of every gamma-token window of the context, used to find copy sources.

Positions are 1-based. A window is looked up by a 64-bit polynomial hash and
confirmed against the stored tokens, so hash collisions never produce a
match.
"""

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .errors import ConfigError, EmptyChunk

DEFAULT_GAMMA = 3
HASH_BASE = 1099511628211
MASK64 = (1 << 64) - 1

Gram = Tuple[int, ...]
HashFn = Callable[[Sequence[int]], int]


def polynomial_hash(gram: Sequence[int]) -> int:
    h = 0
    for tok in gram:
        h = (h * HASH_BASE + tok + 1) & MASK64
    return h


@dataclass(frozen=True)
class GammaConfig:
    gamma: int = DEFAULT_GAMMA

    def __post_init__(self):
        if self.gamma < 1:
            raise ConfigError(f"gamma must be >= 1, got {self.gamma}")


@dataclass(frozen=True)
class MatchResult:
    source_pos: int
    copy_start: int


class MatchIndex:
    def __init__(self, gamma: int = DEFAULT_GAMMA, hash_fn: HashFn = polynomial_hash):
        self.config = GammaConfig(gamma)
        self.hash_fn = hash_fn
        self.buckets: Dict[int, List[Tuple[int, Gram]]] = {}
        self.length = 0
        # instrumentation
        self.mix_steps = 0
        self.lookups = 0
        self.inserted = 0

    @property
    def gamma(self) -> int:
        return self.config.gamma

    @classmethod
    def from_context(cls, context: Sequence[int], gamma: int = DEFAULT_GAMMA,
                     hash_fn: HashFn = polynomial_hash) -> "MatchIndex":
        index = cls(gamma, hash_fn)
        index.extend(context, context)
        return index

    def _hash(self, gram: Sequence[int]) -> int:
        self.mix_steps += len(gram)
        return self.hash_fn(gram)

    def __len__(self) -> int:
        return sum(len(b) for b in self.buckets.values())

    def extend(self, new_tokens: Sequence[int], context: Sequence[int]) -> int:
        """Index every window that ends inside new_tokens. Returns the number inserted."""
        old_len = self.length
        if old_len + len(new_tokens) != len(context):
            raise ValueError(
                f"index covers {old_len} tokens; appending {len(new_tokens)} does not reach {len(context)}"
            )
        g = self.gamma
        first = max(1, old_len - g + 2)
        last = len(context) - g + 1
        count = 0
        for q in range(first, last + 1):
            gram = tuple(context[q - 1:q - 1 + g])
            self.buckets.setdefault(self._hash(gram), []).append((q, gram))
            count += 1
        self.length = len(context)
        self.inserted += count
        return count

    def lookup(self, context: Sequence[int], t: Optional[int] = None) -> Optional[MatchResult]:
        """Earliest p holding the last gamma tokens of context[:t] with p + gamma - 1 < t - gamma + 1."""
        g = self.gamma
        if t is None:
            t = len(context)
        if t < g:
            return None
        self.lookups += 1
        s = tuple(context[t - g:t])
        limit = t - g + 1
        for pos, gram in self.buckets.get(self._hash(s), ()):
            if pos + g - 1 >= limit:
                break
            if gram == s:
                return MatchResult(source_pos=pos, copy_start=pos + g)
        return None


def extract_chunk(context: Sequence[int], match: MatchResult, chunk_len: int) -> List[int]:
    start = match.copy_start
    if start > len(context):
        raise EmptyChunk(start, len(context))
    return list(context[start - 1:start - 1 + chunk_len])
