"""Tokenization and ingestion of multi-turn transcripts.

Transcript files are JSON Lines, one conversation per line:

    {"id": "r-0001", "category": "writing",
     "turns": [{"role": "user", "text": "..."}, {"role": "assistant", "text": "..."}]}

Assistant turns are optional references: generation ignores them, model
training and corpus statistics use them.
"""

import json
import logging
import os
import runpy
import tempfile
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple

from .errors import (
    BadRoleSequence,
    ConfigError,
    InvalidTokenId,
    MissingField,
    ParseError,
    UnknownSymbol,
)

logger = logging.getLogger(__name__)

EOT = "<eot>"
USER_TAG = "<user>"
ASSISTANT_TAG = "<assistant>"
RESERVED_SYMBOLS = (EOT, USER_TAG, ASSISTANT_TAG)
EOT_ID = 0

PUNCTUATION = ".,;:!?"

ROLES = ("user", "assistant")

GENERATOR_DIR = Path(__file__).resolve().parent.parent / "corpus-generators"

BUILTIN_CORPORA = {
    "redundant-2turn": GENERATOR_DIR / "redundant-2turn.py",
    "novel-2turn": GENERATOR_DIR / "novel-2turn.py",
    "selfcorrect-3turn": GENERATOR_DIR / "selfcorrect-3turn.py",
    "extractive-1turn": GENERATOR_DIR / "extractive-1turn.py",
}
DEFAULT_CORPUS_SAMPLES = 60
DEFAULT_CORPUS_SEED = 42

TokenSeq = List[int]


# ---------------- Vocabulary ----------------

@dataclass
class Vocabulary:
    """Append-only symbol table. Ids of known symbols never change."""

    symbols: List[str] = field(default_factory=list)
    lookup: Dict[str, int] = field(default_factory=dict)

    @classmethod
    def new(cls) -> "Vocabulary":
        vocab = cls()
        for sym in RESERVED_SYMBOLS:
            vocab.add(sym)
        return vocab

    @classmethod
    def from_symbols(cls, symbols: Sequence[str]) -> "Vocabulary":
        if list(symbols[: len(RESERVED_SYMBOLS)]) != list(RESERVED_SYMBOLS):
            raise ConfigError(f"vocabulary must start with reserved symbols {RESERVED_SYMBOLS}")
        vocab = cls()
        for sym in symbols:
            if sym in vocab.lookup:
                raise ConfigError(f"duplicate vocabulary symbol {sym!r}")
            vocab.add(sym)
        return vocab

    def __len__(self) -> int:
        return len(self.symbols)

    def __contains__(self, symbol: str) -> bool:
        return symbol in self.lookup

    def add(self, symbol: str) -> int:
        idx = self.lookup.get(symbol)
        if idx is None:
            idx = len(self.symbols)
            self.symbols.append(symbol)
            self.lookup[symbol] = idx
        return idx

    def id_of(self, symbol: str) -> int:
        try:
            return self.lookup[symbol]
        except KeyError:
            raise UnknownSymbol(symbol) from None

    def symbol(self, token_id: int) -> str:
        if not 0 <= token_id < len(self.symbols):
            raise InvalidTokenId(token_id, len(self.symbols))
        return self.symbols[token_id]

    @property
    def eot_id(self) -> int:
        return self.lookup[EOT]

    @property
    def user_id(self) -> int:
        return self.lookup[USER_TAG]

    @property
    def assistant_id(self) -> int:
        return self.lookup[ASSISTANT_TAG]


# ---------------- Tokenizer ----------------

def split_symbols(text: str) -> List[str]:
    """Whitespace split, then trailing .,;:!? split off as separate symbols."""
    out: List[str] = []
    for piece in text.split():
        trail = []
        while piece and piece[-1] in PUNCTUATION:
            trail.append(piece[-1])
            piece = piece[:-1]
        if piece:
            out.append(piece)
        out.extend(reversed(trail))
    return out


def tokenize(text: str, vocab: Vocabulary, grow: bool = False) -> TokenSeq:
    if grow:
        return [vocab.add(sym) for sym in split_symbols(text)]
    return [vocab.id_of(sym) for sym in split_symbols(text)]


def detokenize(seq: Sequence[int], vocab: Vocabulary) -> str:
    return " ".join(vocab.symbol(t) for t in seq)


# ---------------- Transcripts ----------------

@dataclass(frozen=True)
class Turn:
    role: str
    text: str


@dataclass(frozen=True)
class Transcript:
    id: str
    category: str
    turns: Tuple[Turn, ...]

    @property
    def user_turns(self) -> List[Turn]:
        return [t for t in self.turns if t.role == "user"]

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "category": self.category,
            "turns": [{"role": t.role, "text": t.text} for t in self.turns],
        }


def _check_roles(turns: Sequence[Turn], line: int) -> None:
    if not turns:
        raise BadRoleSequence(line, "transcript has no turns")
    for i, turn in enumerate(turns):
        expected = ROLES[i % 2]
        if turn.role != expected:
            raise BadRoleSequence(line, f"turn {i + 1} has role {turn.role!r}, expected {expected!r}")


def parse_record(obj: object, line: int) -> Transcript:
    if not isinstance(obj, dict):
        raise ParseError(line, "expected a JSON object")
    if "turns" not in obj:
        raise MissingField(line, "turns")
    raw_turns = obj["turns"]
    if not isinstance(raw_turns, list):
        raise ParseError(line, "'turns' must be a list")

    turns = []
    for raw in raw_turns:
        if not isinstance(raw, dict):
            raise ParseError(line, "each turn must be an object")
        for name in ("role", "text"):
            if name not in raw:
                raise MissingField(line, name)
        if not isinstance(raw["text"], str):
            raise ParseError(line, "turn text must be a string")
        turns.append(Turn(role=raw["role"], text=raw["text"]))
    _check_roles(turns, line)

    return Transcript(
        id=str(obj.get("id", f"line-{line}")),
        category=str(obj.get("category", "uncategorized")),
        turns=tuple(turns),
    )


def load_transcripts(path) -> List[Transcript]:
    path = Path(path)
    transcripts = []
    with path.open("r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise ParseError(line_no, f"invalid JSON ({e.msg})") from e
            transcripts.append(parse_record(obj, line_no))
    logger.info("Loaded %d transcripts from %s", len(transcripts), path)
    return transcripts


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_jsonl(path, rows: Iterable[dict], fresh: bool = True) -> None:
    text = "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in rows)
    path = Path(path)
    if not fresh and path.exists():
        text = path.read_text(encoding="utf-8") + text
    atomic_write_text(path, text)


def write_transcripts(path, transcripts: Sequence[Transcript], fresh: bool = True) -> None:
    write_jsonl(path, (t.to_record() for t in transcripts), fresh=fresh)


# ---------------- Built-in corpora ----------------

def load_builtin_corpus(name: str, samples: int = DEFAULT_CORPUS_SAMPLES,
                        seed: int = DEFAULT_CORPUS_SEED) -> List[Transcript]:
    """Runs the seeded generator script for a shipped corpus and parses its rows."""
    try:
        script = BUILTIN_CORPORA[name]
    except KeyError:
        raise ConfigError(f"unknown built-in corpus {name!r}; choose from {sorted(BUILTIN_CORPORA)}") from None
    g = runpy.run_path(str(script))
    gen = g.get("generate")
    if not callable(gen):
        raise ConfigError(f"no generate() function found in {script}")
    rows = gen(samples, seed)
    return [parse_record(row, i + 1) for i, row in enumerate(rows)]


def resolve_corpus(spec: str, samples: int = DEFAULT_CORPUS_SAMPLES,
                   seed: int = DEFAULT_CORPUS_SEED) -> List[Transcript]:
    if spec in BUILTIN_CORPORA:
        return load_builtin_corpus(spec, samples=samples, seed=seed)
    return load_transcripts(spec)


# ---------------- Context assembly ----------------

def build_vocabulary(transcripts: Iterable[Transcript]) -> Vocabulary:
    vocab = Vocabulary.new()
    for transcript in transcripts:
        for turn in transcript.turns:
            tokenize(turn.text, vocab, grow=True)
    return vocab


def assemble_prompt(history: Sequence[Tuple[str, Sequence[int]]], user_ids: Sequence[int],
                    vocab: Vocabulary) -> TokenSeq:
    """Context for the next assistant turn.

    history holds (role, token ids) for every earlier turn, assistant entries
    being the generated outputs. Each turn is preceded by its role tag and the
    prompt ends with <assistant>.
    """
    tags = {"user": vocab.user_id, "assistant": vocab.assistant_id}
    ctx: TokenSeq = []
    for role, ids in history:
        ctx.append(tags[role])
        ctx.extend(ids)
    ctx.append(vocab.user_id)
    ctx.extend(user_ids)
    ctx.append(vocab.assistant_id)
    return ctx


def training_sequences(transcripts: Iterable[Transcript], vocab: Vocabulary) -> List[TokenSeq]:
    """One sequence per transcript; reference assistant turns end with <eot>."""
    seqs = []
    for transcript in transcripts:
        seq: TokenSeq = []
        for turn in transcript.turns:
            if turn.role == "user":
                seq.append(vocab.user_id)
                seq.extend(tokenize(turn.text, vocab))
            else:
                seq.append(vocab.assistant_id)
                seq.extend(tokenize(turn.text, vocab))
                seq.append(vocab.eot_id)
        seqs.append(seq)
    return seqs


# ---------------- Corpus statistics ----------------

def _grams(seq: Sequence[int], gamma: int) -> List[Tuple[int, ...]]:
    return [tuple(seq[i:i + gamma]) for i in range(len(seq) - gamma + 1)]


def corpus_stats(transcripts: Sequence[Transcript], vocab: Vocabulary, gamma: int = 3) -> List[dict]:
    """Per-category counts and the redundancy ratio of reference answers."""
    acc: Dict[str, Dict[str, float]] = defaultdict(lambda: defaultdict(float))
    for transcript in transcripts:
        row = acc[transcript.category]
        row["transcripts"] += 1
        seen = set()
        history: TokenSeq = []
        for turn in transcript.turns:
            ids = tokenize(turn.text, vocab)
            row["turns"] += 1
            if turn.role == "user":
                row["user_tokens"] += len(ids)
            else:
                row["reference_tokens"] += len(ids)
                grams = _grams(ids, gamma)
                row["reference_grams"] += len(grams)
                row["copyable_grams"] += sum(1 for g in grams if g in seen)
            history.extend(ids)
            seen.update(_grams(history, gamma))

    out = []
    for category in sorted(acc):
        row = acc[category]
        n_grams = row["reference_grams"]
        out.append({
            "category": category,
            "transcripts": int(row["transcripts"]),
            "turns": int(row["turns"]),
            "user_tokens": int(row["user_tokens"]),
            "reference_tokens": int(row["reference_tokens"]),
            "redundancy": (row["copyable_grams"] / n_grams) if n_grams else 0.0,
        })
    return out
