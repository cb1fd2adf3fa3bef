"""Speculative copy generation: copy repeated spans from the context, verify them with the target model."""

from .corpus import Transcript, Turn, Vocabulary, detokenize, load_transcripts, tokenize
from .engine import AttemptOutcome, EngineConfig, Session, Strategy, generate, greedy_decode, run_transcript
from .errors import CopySpecError
from .lm import KgramLM, LangModel, TableLM, train_kgram
from .match_index import MatchIndex, MatchResult, extract_chunk
from .metrics import CostModel, RunMetrics, score_log, speedup

__all__ = [
    "AttemptOutcome", "CopySpecError", "CostModel", "EngineConfig", "KgramLM", "LangModel",
    "MatchIndex", "MatchResult", "RunMetrics", "Session", "Strategy", "TableLM", "Transcript",
    "Turn", "Vocabulary", "detokenize", "extract_chunk", "generate", "greedy_decode",
    "load_transcripts", "run_transcript", "score_log", "speedup", "tokenize", "train_kgram",
]
