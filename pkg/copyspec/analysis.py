"""Hyperparameter sweeps and the left-context skip-gram similarity study."""

import dataclasses
import logging
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch
import torch.nn.functional as F
from safetensors import safe_open
from safetensors.numpy import save_file
from tqdm import tqdm

from .corpus import Transcript, Vocabulary, atomic_write_text
from .engine import EngineConfig, TranscriptResult, run_corpus
from .errors import ConfigError, ModelFormatError, VocabTooLarge, ZeroVector
from .lm import LangModel
from .metrics import CostModel, RunMetrics, mean_metrics, score_log

logger = logging.getLogger(__name__)

SWEEP_AXES = ("gamma", "chunk_len", "draft_len")
MAX_SKIPGRAM_VOCAB = 5000
EMBEDDING_FORMAT_VERSION = "1"


# ---------------- sweeps ----------------

@dataclass
class SweepPoint:
    value: int
    metrics: RunMetrics
    copy_attempts: float
    per_transcript: List[Tuple[str, RunMetrics]] = field(default_factory=list)


@dataclass
class SweepResult:
    axis: str
    points: List[SweepPoint]


def transcript_metrics(result: TranscriptResult, cost: CostModel) -> RunMetrics:
    """Metrics over the attempt logs of all turns of one transcript combined."""
    log = [o for turn in result.turns for o in turn.log]
    return score_log(log, cost)


def sweep(transcripts: Sequence[Transcript], vocab: Vocabulary, target: LangModel,
          draft: Optional[LangModel], base_config: EngineConfig, axis: str, values: Sequence[int],
          cost: Optional[CostModel] = None, jobs: int = 1, progress: bool = False) -> SweepResult:
    if axis not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; choose from {SWEEP_AXES}")
    values = list(values)
    if not values:
        raise ConfigError("sweep needs at least one value")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ConfigError(f"sweep values must be strictly increasing, got {values}")
    cost = cost or CostModel()

    points = []
    for value in tqdm(values, desc=f"sweep {axis}", disable=not progress):
        config = dataclasses.replace(base_config, **{axis: value})
        results = run_corpus(transcripts, vocab, target, draft, config, cost, jobs=jobs)
        per = [(r.transcript_id, transcript_metrics(r, cost)) for r in results]
        agg = mean_metrics([m for _, m in per])
        points.append(SweepPoint(value, agg, agg.copy_attempts, per))
        logger.info("%s=%d: sim_tps=%.4f pct_copied=%.3f tau1=%.3f attempts=%.2f",
                    axis, value, agg.sim_tps, agg.pct_copied, agg.tau1, agg.copy_attempts)
    return SweepResult(axis, points)


def sweep_long_rows(result: SweepResult) -> List[Tuple[int, str, float]]:
    """(value, metric, number) rows for plotting."""
    rows = []
    for p in result.points:
        for metric in ("sim_tps", "pct_copied", "tau1", "tau2", "copy_attempts"):
            rows.append((p.value, metric, getattr(p.metrics, metric)))
    return rows


def write_long_csv(path, rows: Sequence[Tuple[int, str, float]]) -> None:
    text = "value,metric,number\n" + "".join(f"{v},{m},{n!r}\n" for v, m, n in rows)
    atomic_write_text(path, text)


# ---------------- left-context skip-gram ----------------

@dataclass
class EmbeddingModel:
    vectors: np.ndarray
    gamma: int
    losses: List[float] = field(default_factory=list)

    def __post_init__(self):
        if self.vectors.ndim != 2 or self.vectors.shape[1] < 2:
            raise ConfigError(f"embedding needs shape (vocab, dim>=2), got {self.vectors.shape}")
        if not np.all(np.isfinite(self.vectors)):
            raise ValueError("embedding vectors must be finite")

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def vocab_size(self) -> int:
        return self.vectors.shape[0]


def left_context_pairs(corpus: Sequence[Sequence[int]], gamma: int) -> Tuple[np.ndarray, np.ndarray]:
    """Every (previous gamma tokens, token) pair; contexts of shape (n, gamma)."""
    ctx, nxt = [], []
    for seq in corpus:
        for i in range(gamma, len(seq)):
            ctx.append(seq[i - gamma:i])
            nxt.append(seq[i])
    if not ctx:
        return np.zeros((0, gamma), dtype=np.int64), np.zeros(0, dtype=np.int64)
    return np.asarray(ctx, dtype=np.int64), np.asarray(nxt, dtype=np.int64)


def train_left_skipgram(corpus: Sequence[Sequence[int]], gamma: int, dim: int = 16, epochs: int = 30,
                        learning_rate: float = 0.5, seed: int = 42, vocab_size: Optional[int] = None,
                        batch_size: int = 32, progress: bool = False) -> EmbeddingModel:
    """Full-softmax training of P(token | mean of the previous gamma embeddings).

    One embedding table is used both for context tokens and predicted tokens.
    """
    if gamma < 1:
        raise ConfigError(f"gamma must be >= 1, got {gamma}")
    if dim < 2:
        raise ConfigError(f"dim must be >= 2, got {dim}")
    if vocab_size is None:
        vocab_size = 1 + max((max(seq) for seq in corpus if seq), default=0)
    if vocab_size > MAX_SKIPGRAM_VOCAB:
        raise VocabTooLarge(vocab_size, MAX_SKIPGRAM_VOCAB)

    gen = torch.Generator().manual_seed(seed)
    weights = (torch.rand(vocab_size, dim, generator=gen, dtype=torch.float64) - 0.5) / dim
    weights.requires_grad_(True)
    optimizer = torch.optim.SGD([weights], lr=learning_rate)

    ctx_np, nxt_np = left_context_pairs(corpus, gamma)
    ctx = torch.from_numpy(ctx_np)
    nxt = torch.from_numpy(nxt_np)
    n = len(nxt)
    losses: List[float] = []

    for epoch in tqdm(range(epochs if n else 0), desc=f"skipgram g={gamma}", disable=not progress):
        order = torch.randperm(n, generator=gen)
        total = 0.0
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            ctx_vec = weights[ctx[idx]].mean(dim=1)
            loss = F.cross_entropy(ctx_vec @ weights.T, nxt[idx])
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            total += loss.item() * len(idx)
        losses.append(total / n)
        logger.debug("skipgram gamma=%d epoch %d loss %.6f", gamma, epoch + 1, losses[-1])

    return EmbeddingModel(weights.detach().numpy().copy(), gamma, losses)


def context_vector(embedding: EmbeddingModel, context: Sequence[int]) -> np.ndarray:
    """Mean of the embeddings of the last gamma tokens of context."""
    tail = list(context)[-embedding.gamma:]
    return embedding.vectors[tail].mean(axis=0)


def next_token_probs(embedding: EmbeddingModel, context: Sequence[int]) -> np.ndarray:
    logits = embedding.vectors @ context_vector(embedding, context)
    logits = logits - logits.max()
    p = np.exp(logits)
    return p / p.sum()


def cosine_similarity(context_vec, token_vec) -> float:
    a = np.asarray(context_vec, dtype=float)
    b = np.asarray(token_vec, dtype=float)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ZeroVector("cosine similarity of a zero vector")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


@dataclass
class SimilarityStats:
    gamma: int
    mean: float
    stderr: float
    values: np.ndarray


def _stats(gamma: int, values: np.ndarray) -> SimilarityStats:
    n = len(values)
    if n == 0:
        return SimilarityStats(gamma, 0.0, 0.0, values)
    stderr = float(values.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return SimilarityStats(gamma, float(values.mean()), stderr, values)


def pair_similarities(corpus: Sequence[Sequence[int]], embedding: EmbeddingModel, gamma: int,
                      permute_seed: Optional[int] = None) -> SimilarityStats:
    """CS between every left-gamma context vector and its next token.

    With permute_seed the next tokens are shuffled across pairs first, which
    gives the chance level for the same token frequencies.
    """
    ctx, nxt = left_context_pairs(corpus, gamma)
    if permute_seed is not None:
        nxt = np.random.default_rng(permute_seed).permutation(nxt)
    vecs = embedding.vectors
    values = np.array([cosine_similarity(vecs[c].mean(axis=0), vecs[t]) for c, t in zip(ctx, nxt)])
    return _stats(gamma, values)


def permutation_baseline(corpus: Sequence[Sequence[int]], embedding: EmbeddingModel, gamma: int,
                         seed: int = 42) -> SimilarityStats:
    return pair_similarities(corpus, embedding, gamma, permute_seed=seed)


def cs_profile(corpus: Sequence[Sequence[int]], embedding: Optional[EmbeddingModel], gammas: Sequence[int],
               progress: bool = False, **train_kwargs) -> List[Tuple[int, float]]:
    """Mean CS per gamma.

    With embedding=None a fresh model is trained per gamma (train_kwargs go to
    train_left_skipgram); otherwise the given model serves every gamma up to
    its own.
    """
    if embedding is not None and max(gammas) > embedding.gamma:
        raise ConfigError(f"embedding trained for gamma={embedding.gamma} cannot serve gamma={max(gammas)}")
    out = []
    for g in gammas:
        model = embedding if embedding is not None else train_left_skipgram(corpus, g, progress=progress, **train_kwargs)
        stats = pair_similarities(corpus, model, g)
        if len(stats.values) == 0:
            logger.warning("no (context, token) pairs for gamma=%d", g)
        out.append((g, stats.mean))
    return out


# ---------------- persistence ----------------

def save_embedding(model: EmbeddingModel, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    os.close(fd)
    try:
        save_file({"vectors": np.ascontiguousarray(model.vectors)}, tmp, metadata={
            "gamma": str(model.gamma),
            "dim": str(model.dim),
            "format_version": EMBEDDING_FORMAT_VERSION,
        })
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_embedding(path) -> EmbeddingModel:
    with safe_open(str(path), framework="np") as f:
        meta: Dict[str, str] = f.metadata() or {}
        if meta.get("format_version") != EMBEDDING_FORMAT_VERSION or "vectors" not in f.keys():
            raise ModelFormatError(f"{path}: not a copyspec embedding file")
        vectors = f.get_tensor("vectors")
    return EmbeddingModel(vectors, int(meta["gamma"]))
