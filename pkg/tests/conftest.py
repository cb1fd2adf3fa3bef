from dataclasses import dataclass
from typing import List, Optional

import numpy as np
import pytest

from copyspec.corpus import Transcript, Vocabulary, build_vocabulary, load_builtin_corpus, training_sequences
from copyspec.lm import KgramLM, TableLM, train_kgram


@dataclass
class CorpusBundle:
    name: str
    transcripts: List[Transcript]
    vocab: Vocabulary
    target: KgramLM
    draft: KgramLM


def _bundle(name: str, samples: Optional[int] = None) -> CorpusBundle:
    transcripts = load_builtin_corpus(name) if samples is None else load_builtin_corpus(name, samples=samples)
    vocab = build_vocabulary(transcripts)
    seqs = training_sequences(transcripts, vocab)
    return CorpusBundle(
        name=name,
        transcripts=transcripts,
        vocab=vocab,
        target=train_kgram(seqs, 4, vocab_size=len(vocab), symbols=vocab.symbols),
        draft=train_kgram(seqs, 2, vocab_size=len(vocab)),
    )


@pytest.fixture(scope="session")
def redundant() -> CorpusBundle:
    return _bundle("redundant-2turn")


@pytest.fixture(scope="session")
def novel() -> CorpusBundle:
    return _bundle("novel-2turn")


@pytest.fixture(scope="session")
def selfcorrect() -> CorpusBundle:
    return _bundle("selfcorrect-3turn")


@pytest.fixture(scope="session")
def extractive() -> CorpusBundle:
    return _bundle("extractive-1turn")


@pytest.fixture(scope="session")
def small_redundant() -> CorpusBundle:
    return _bundle("redundant-2turn", samples=6)


def random_table_lm(rng: np.random.Generator, vocab_size: int, order: int, fill: float = 0.8) -> TableLM:
    """Table over every order-gram of a small alphabet; most keys mapped, the rest fall back."""
    table = {}
    for key in np.ndindex(*([vocab_size] * order)):
        if rng.random() < fill:
            table[tuple(int(k) for k in key)] = int(rng.integers(0, vocab_size))
    return TableLM(order, table, fallback=int(rng.integers(0, vocab_size)), vocab_size=vocab_size)


def random_kgram_lm(rng: np.random.Generator, vocab_size: int, order: int) -> KgramLM:
    corpus = [rng.integers(0, vocab_size, size=int(rng.integers(5, 80))).tolist()
              for _ in range(int(rng.integers(1, 6)))]
    return train_kgram(corpus, order, vocab_size=vocab_size)


@pytest.fixture
def make_table_lm():
    return random_table_lm


@pytest.fixture
def make_kgram_lm():
    return random_kgram_lm
