"""Pass-counting cost model and per-run counters.

Simulated time charges every target verification pass, every scored
position, every drafted token and every index operation. It covers
generation only: prompt prefill and prompt indexing are free.
"""

import csv
import io
import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from .corpus import atomic_write_text
from .errors import ConfigError, DivByZero, EmptyLog


@dataclass(frozen=True)
class CostModel:
    target_pass_cost: float = 1.0
    target_per_token_cost: float = 0.02
    draft_token_cost: float = 0.1
    index_op_cost: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if value < 0:
                raise ConfigError(f"{f.name} must be >= 0, got {value}")
        if self.target_pass_cost == 0 and self.target_per_token_cost == 0:
            raise ConfigError("target_pass_cost and target_per_token_cost cannot both be 0")


@dataclass(frozen=True)
class RunMetrics:
    # counts are means (floats) once aggregated with mean_metrics
    tokens_out: float
    copied_tokens: float
    copy_attempts: float
    draft_attempts: float
    plain_steps: float
    tau1: float
    tau2: float
    sim_time: float
    sim_tps: float
    pct_copied: float


METRIC_FIELDS = tuple(f.name for f in fields(RunMetrics))


def attempt_cost(outcome, cost: CostModel) -> float:
    return (cost.target_pass_cost
            + cost.target_per_token_cost * outcome.scored_tokens
            + cost.draft_token_cost * outcome.draft_proposed
            + cost.index_op_cost * outcome.index_ops)


def score_log(log: Sequence, cost: CostModel) -> RunMetrics:
    if not log:
        raise EmptyLog("cannot score an empty attempt log")
    tokens_out = copied = copy_attempts = draft_attempts = plain = draft_accepted = 0
    sim_time = 0.0
    for o in log:
        tokens_out += o.emitted
        sim_time += attempt_cost(o, cost)
        if o.source == "copy":
            copy_attempts += 1
            copied += o.accepted_k
        elif o.source == "draft":
            draft_attempts += 1
            draft_accepted += o.accepted_k
        else:
            plain += 1
    return RunMetrics(
        tokens_out=tokens_out,
        copied_tokens=copied,
        copy_attempts=copy_attempts,
        draft_attempts=draft_attempts,
        plain_steps=plain,
        tau1=copied / copy_attempts if copy_attempts else 0.0,
        tau2=draft_accepted / draft_attempts if draft_attempts else 0.0,
        sim_time=sim_time,
        sim_tps=tokens_out / sim_time,
        pct_copied=copied / tokens_out if tokens_out else 0.0,
    )


def speedup(metrics_a: RunMetrics, metrics_b: RunMetrics) -> float:
    """sim_tps of a relative to b."""
    if metrics_a.tokens_out == 0 or metrics_b.tokens_out == 0:
        raise DivByZero("speedup undefined for a run that produced no tokens")
    return metrics_a.sim_tps / metrics_b.sim_tps


def mean_metrics(items: Sequence[RunMetrics]) -> RunMetrics:
    if not items:
        raise EmptyLog("cannot average zero runs")
    table = np.array([[getattr(m, name) for name in METRIC_FIELDS] for m in items], dtype=float)
    return RunMetrics(*(float(v) for v in table.mean(axis=0)))


def metrics_from_record(record: Dict) -> RunMetrics:
    return RunMetrics(*(float(record[name]) for name in METRIC_FIELDS))


# ---------------- records / export ----------------

LABEL_COLUMNS = ("kind", "corpus", "transcript_id", "category", "turn", "strategy")
ECHO_COLUMNS = ("gamma", "chunk_len", "draft_len", "max_new_tokens", "seed",
                "cost_target", "cost_target_token", "cost_draft_token", "cost_index_op")
RECORD_COLUMNS = LABEL_COLUMNS + METRIC_FIELDS + ECHO_COLUMNS
TEXT_COLUMNS = ("kind", "corpus", "transcript_id", "category", "strategy")


def config_echo(config, cost: CostModel, seed: int) -> Dict:
    return {
        "gamma": config.gamma,
        "chunk_len": config.chunk_len,
        "draft_len": config.draft_len,
        "max_new_tokens": config.max_new_tokens,
        "seed": seed,
        "cost_target": cost.target_pass_cost,
        "cost_target_token": cost.target_per_token_cost,
        "cost_draft_token": cost.draft_token_cost,
        "cost_index_op": cost.index_op_cost,
    }


def metrics_record(kind: str, metrics: RunMetrics, echo: Optional[Dict] = None, **labels) -> Dict:
    values = {"kind": kind, **labels, **asdict(metrics), **(echo or {})}
    return {col: values.get(col) for col in RECORD_COLUMNS}


def _records_to_csv(records: Iterable[Dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    for r in records:
        writer.writerow({k: "" if r.get(k) is None else r[k] for k in columns})
    return buf.getvalue()


def write_records(path, records: Sequence[Dict], fmt: str = "json",
                  columns: Sequence[str] = RECORD_COLUMNS) -> None:
    """JSON Lines or CSV with the same columns in the same order."""
    if fmt == "csv":
        text = _records_to_csv(records, columns)
    elif fmt == "json":
        text = "".join(json.dumps({k: r.get(k) for k in columns}, ensure_ascii=False) + "\n" for r in records)
    else:
        raise ConfigError(f"unknown output format {fmt!r}")
    atomic_write_text(path, text)


def _coerce(value: str):
    if value == "":
        return None
    for conv in (int, float):
        try:
            return conv(value)
        except ValueError:
            pass
    return value


def read_records(path) -> List[Dict]:
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as f:
        if path.suffix.lower() == ".csv":
            return [
                {k: ((v or None) if k in TEXT_COLUMNS else _coerce(v)) for k, v in row.items()}
                for row in csv.DictReader(f)
            ]
        return [json.loads(line) for line in f if line.strip()]
