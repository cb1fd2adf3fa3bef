"""Exception hierarchy shared by every copyspec module."""

from typing import Optional


class CopySpecError(Exception):
    """Base class for all domain errors raised by copyspec."""


class ConfigError(CopySpecError):
    """A configuration value violates its invariant (CLI exit code 2)."""


# ---------------- corpus ----------------

class UnknownSymbol(CopySpecError):
    def __init__(self, symbol: str):
        super().__init__(f"symbol not in vocabulary: {symbol!r}")
        self.symbol = symbol


class InvalidTokenId(CopySpecError):
    def __init__(self, token_id: int, vocab_size: int):
        super().__init__(f"token id {token_id} outside vocabulary of size {vocab_size}")
        self.token_id = token_id
        self.vocab_size = vocab_size


class ParseError(CopySpecError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class MissingField(ParseError):
    def __init__(self, line: int, name: str):
        super().__init__(line, f"missing field {name!r}")
        self.name = name


class BadRoleSequence(ParseError):
    pass


# ---------------- match_index ----------------

class EmptyChunk(CopySpecError):
    def __init__(self, copy_start: int, context_len: int):
        super().__init__(f"copy_start {copy_start} is past the context end ({context_len})")
        self.copy_start = copy_start
        self.context_len = context_len


# ---------------- lm ----------------

class InvalidToken(CopySpecError):
    def __init__(self, token_id: int, vocab_size: int):
        super().__init__(f"token id {token_id} invalid for vocab_size {vocab_size}")
        self.token_id = token_id
        self.vocab_size = vocab_size


class TruncateBeyondState(CopySpecError):
    def __init__(self, keep_len: int, state_len: int):
        super().__init__(f"cannot truncate to {keep_len}: cached state holds {state_len} tokens")
        self.keep_len = keep_len
        self.state_len = state_len


class ModelFormatError(CopySpecError):
    pass


# ---------------- engine ----------------

class BudgetExhausted(CopySpecError):
    """Normal termination signal: the session already emitted max_new_tokens or hit <eot>."""


# ---------------- metrics ----------------

class EmptyLog(CopySpecError):
    pass


class DivByZero(CopySpecError):
    pass


# ---------------- analysis ----------------

class VocabTooLarge(CopySpecError):
    def __init__(self, vocab_size: int, limit: int):
        super().__init__(f"vocabulary of {vocab_size} symbols exceeds full-softmax limit {limit}")
        self.vocab_size = vocab_size
        self.limit = limit


class ZeroVector(CopySpecError):
    pass


# ---------------- cli ----------------

class MissingBaseline(CopySpecError):
    def __init__(self, turn: Optional[str] = None, corpus: Optional[str] = None):
        where = f" for turn {turn}" if turn is not None else ""
        if corpus is not None:
            where += f" of corpus {corpus}"
        super().__init__(f"speedup requested but no baseline run found{where}")
        self.turn = turn
        self.corpus = corpus
