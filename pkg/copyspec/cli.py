"""Command-line entry point: run, sweep, train-lm, skipgram, report, stats.

Examples:
    python -m copyspec run --corpus redundant-2turn --strategy baseline
    python -m copyspec run --corpus redundant-2turn --strategy copy
    python -m copyspec report results/run-redundant-2turn-baseline.jsonl results/run-redundant-2turn-copy.jsonl
    python -m copyspec sweep --corpus redundant-2turn --axis gamma --values 2,3,4,5,6,7,8
"""

import argparse
import logging
import os
import sys
from collections import defaultdict
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import yaml

from .analysis import (
    pair_similarities,
    permutation_baseline,
    save_embedding,
    sweep,
    sweep_long_rows,
    train_left_skipgram,
    transcript_metrics,
    write_long_csv,
)
from .corpus import (
    BUILTIN_CORPORA,
    DEFAULT_CORPUS_SAMPLES,
    Vocabulary,
    atomic_write_text,
    build_vocabulary,
    corpus_stats,
    resolve_corpus,
    tokenize,
    training_sequences,
)
from .engine import EngineConfig, Strategy, run_corpus
from .errors import ConfigError, CopySpecError, MissingBaseline, ModelFormatError
from .lm import load_kgram, save_kgram, train_kgram
from .metrics import (
    CostModel,
    config_echo,
    mean_metrics,
    metrics_from_record,
    metrics_record,
    read_records,
    speedup,
    write_records,
)

logger = logging.getLogger("copyspec")

DEFAULT_SEED = 42
SEED_ENV = "COPYSPEC_SEED"
RESULTS_DIR = Path("results")
MODELS_DIR = Path("models")
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


# ---------------- argument parsing ----------------

def _int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=str, default=None, help="YAML file with flag defaults")
    p.add_argument("--log-level", type=str, default="INFO")
    p.add_argument("--seed", type=int, default=None,
                   help=f"default: ${SEED_ENV}, then the config file, then {DEFAULT_SEED}")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", type=str, default=None)
    p.add_argument("--format", type=str, choices=["json", "csv"], default="json")


def _corpus_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--corpus", type=str, default="redundant-2turn",
                   help=f"transcript JSONL file or one of {sorted(BUILTIN_CORPORA)}")
    p.add_argument("--corpus-samples", type=int, default=DEFAULT_CORPUS_SAMPLES)


def _engine_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--strategy", type=str, default="copy",
                   help="baseline | copy | specdec | copy+specdec")
    p.add_argument("--gamma", type=int, default=3)
    p.add_argument("--chunk", type=int, default=10)
    p.add_argument("--draft-tokens", type=int, default=3)
    p.add_argument("--max-new-tokens", type=int, default=1024)
    p.add_argument("--cost-target", type=float, default=1.0)
    p.add_argument("--cost-target-token", type=float, default=0.02)
    p.add_argument("--cost-draft-token", type=float, default=0.1)
    p.add_argument("--cost-index-op", type=float, default=0.0)
    p.add_argument("--model-path", type=str, default=None)
    p.add_argument("--draft-model-path", type=str, default=None)
    p.add_argument("--target-order", type=int, default=4)
    p.add_argument("--draft-order", type=int, default=2)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="copyspec", description="Speculative copy generation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="generate every transcript and write per-turn metrics")
    _common(p); _corpus_flags(p); _engine_flags(p)

    p = sub.add_parser("sweep", help="sweep gamma or chunk length")
    _common(p); _corpus_flags(p); _engine_flags(p)
    p.add_argument("--axis", type=str, default="gamma", help="gamma | chunk_len | draft_len")
    p.add_argument("--values", type=_int_list, default=[2, 3, 4, 5, 6, 7, 8])
    p.add_argument("--plot-out", type=str, default=None, help="long-format CSV (value,metric,number)")

    p = sub.add_parser("train-lm", help="train a k-gram model and dump it as JSON")
    _common(p); _corpus_flags(p)
    p.add_argument("--order", type=int, default=4)

    p = sub.add_parser("skipgram", help="left-context skip-gram similarity profile")
    _common(p); _corpus_flags(p)
    p.add_argument("--gammas", type=_int_list, default=[1, 2, 3, 4, 5])
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--save-embedding", type=str, default=None, help="directory for one .safetensors per gamma")

    p = sub.add_parser("report", help="compare run files against the baseline")
    p.add_argument("paths", nargs="+")
    p.add_argument("--markdown", type=str, default=None)
    p.add_argument("--no-speedup", action="store_true")
    p.add_argument("--config", type=str, default=None)
    p.add_argument("--log-level", type=str, default="INFO")

    p = sub.add_parser("stats", help="per-category corpus statistics")
    _common(p); _corpus_flags(p)
    p.add_argument("--gamma", type=int, default=3)

    return parser


def load_config(path) -> Dict:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f) or {}
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror or e}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: invalid YAML ({e})") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a mapping of flag names to values")
    return {str(k).lstrip("-").replace("-", "_"): v for k, v in data.items()}


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    """Config file values replace built-in defaults; explicit flags still win."""
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    known, _ = pre.parse_known_args(argv)

    parser = build_parser()
    config_seed = None
    if known.config:
        cfg = load_config(known.config)
        config_seed = cfg.pop("seed", None)
        subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
        for sp in subparsers.choices.values():
            dests = {a.dest for a in sp._actions}
            sp.set_defaults(**{k: v for k, v in cfg.items() if k in dests})
        all_dests = {a.dest for sp in subparsers.choices.values() for a in sp._actions}
        unknown = sorted(set(cfg) - all_dests)
        if unknown:
            raise ConfigError(f"{known.config}: unknown settings {unknown}")

    args = parser.parse_args(argv)
    args.config_seed = config_seed
    return args


def resolve_seed(args: argparse.Namespace) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    if args.config_seed is not None:
        return int(args.config_seed)
    return DEFAULT_SEED


# ---------------- shared setup ----------------

def corpus_name(spec: str) -> str:
    return spec if spec in BUILTIN_CORPORA else Path(spec).stem


def engine_config(args) -> EngineConfig:
    return EngineConfig(gamma=args.gamma, chunk_len=args.chunk, draft_len=args.draft_tokens,
                        strategy=Strategy.parse(args.strategy), max_new_tokens=args.max_new_tokens)


def cost_model(args) -> CostModel:
    return CostModel(target_pass_cost=args.cost_target, target_per_token_cost=args.cost_target_token,
                     draft_token_cost=args.cost_draft_token, index_op_cost=args.cost_index_op)


def load_corpus(args, seed: int):
    if args.corpus_samples < 1:
        raise ConfigError("--corpus-samples must be >= 1")
    transcripts = resolve_corpus(args.corpus, samples=args.corpus_samples, seed=seed)
    if not transcripts:
        raise CopySpecError(f"corpus {args.corpus!r} is empty")
    return transcripts


def build_models(args, transcripts, config: EngineConfig):
    """Target and optional draft model plus the vocabulary they share."""
    target = load_kgram(args.model_path) if args.model_path else None
    if target is not None and target.symbols:
        # keep the dumped ids; corpus symbols the model never saw are appended
        vocab = Vocabulary.from_symbols(target.symbols)
        for t in transcripts:
            for turn in t.turns:
                tokenize(turn.text, vocab, grow=True)
        target.vocab_size = max(target.vocab_size, len(vocab))
    else:
        vocab = build_vocabulary(transcripts)
    seqs = training_sequences(transcripts, vocab)
    if target is None:
        target = train_kgram(seqs, args.target_order, vocab_size=len(vocab), symbols=vocab.symbols)

    draft = None
    if config.strategy.uses_draft:
        if args.draft_model_path:
            draft = load_kgram(args.draft_model_path)
            if draft.symbols and list(vocab.symbols[:len(draft.symbols)]) != list(draft.symbols):
                raise ModelFormatError(f"{args.draft_model_path}: draft vocabulary does not match the target's")
            draft.vocab_size = max(draft.vocab_size, len(vocab))
        else:
            draft = train_kgram(seqs, args.draft_order, vocab_size=len(vocab))
    return vocab, target, draft


def out_path(args, stem: str) -> Path:
    if args.out:
        return Path(args.out)
    return RESULTS_DIR / f"{stem}{'.csv' if args.format == 'csv' else '.jsonl'}"


# ---------------- commands ----------------

def cmd_run(args) -> int:
    seed = resolve_seed(args)
    config = engine_config(args)
    cost = cost_model(args)
    transcripts = load_corpus(args, seed)
    vocab, target, draft = build_models(args, transcripts, config)

    results = run_corpus(transcripts, vocab, target, draft, config, cost, jobs=args.jobs, progress=True)
    name = corpus_name(args.corpus)
    echo = config_echo(config, cost, seed)
    labels = {"corpus": name, "strategy": config.strategy.value}

    records = []
    by_turn = defaultdict(list)
    by_cat_turn = defaultdict(list)
    combined = []
    for r in results:
        for turn in r.turns:
            records.append(metrics_record("turn", turn.metrics, echo, transcript_id=r.transcript_id,
                                          category=r.category, turn=turn.turn, **labels))
            by_turn[turn.turn].append(turn.metrics)
            by_cat_turn[(r.category, turn.turn)].append(turn.metrics)
        combined.append(transcript_metrics(r, cost))

    for turn_no in sorted(by_turn):
        records.append(metrics_record("aggregate", mean_metrics(by_turn[turn_no]), echo, turn=turn_no, **labels))
    records.append(metrics_record("aggregate", mean_metrics(combined), echo, turn="all", **labels))
    for (cat, turn_no) in sorted(by_cat_turn):
        records.append(metrics_record("aggregate", mean_metrics(by_cat_turn[(cat, turn_no)]), echo,
                                      category=cat, turn=turn_no, **labels))

    out = out_path(args, f"run-{name}-{config.strategy.value}")
    write_records(out, records, args.format)
    print(f"Wrote {len(records)} records to {out}")
    return 0


def cmd_sweep(args) -> int:
    if not args.values:
        raise ConfigError("--values needs at least one integer")
    seed = resolve_seed(args)
    config = engine_config(args)
    cost = cost_model(args)
    axis = "chunk_len" if args.axis in ("chunk", "chunk-len") else args.axis.replace("-", "_")
    transcripts = load_corpus(args, seed)
    vocab, target, draft = build_models(args, transcripts, config)

    result = sweep(transcripts, vocab, target, draft, config, axis, args.values, cost,
                   jobs=args.jobs, progress=True)
    name = corpus_name(args.corpus)
    records = []
    for p in result.points:
        echo = config_echo(config, cost, seed)
        echo[axis] = p.value
        labels = {"corpus": name, "strategy": config.strategy.value, "turn": "all"}
        for tid, m in p.per_transcript:
            records.append(metrics_record("transcript", m, echo, transcript_id=tid, **labels))
        records.append(metrics_record("point", p.metrics, echo, **labels))

    out = out_path(args, f"sweep-{name}-{axis}-{config.strategy.value}")
    write_records(out, records, args.format)
    print(f"Wrote {len(records)} records to {out}")
    if args.plot_out:
        write_long_csv(args.plot_out, sweep_long_rows(result))
        print(f"Wrote plot data to {args.plot_out}")
    for p in result.points:
        print(f"  {axis}={p.value:<4d} sim_tps={p.metrics.sim_tps:.4f}  pct_copied={p.metrics.pct_copied:.3f}  "
              f"tau1={p.metrics.tau1:.3f}  copy_attempts={p.copy_attempts:.2f}")
    return 0


def cmd_train_lm(args) -> int:
    seed = resolve_seed(args)
    transcripts = load_corpus(args, seed)
    vocab = build_vocabulary(transcripts)
    model = train_kgram(training_sequences(transcripts, vocab), args.order,
                        vocab_size=len(vocab), symbols=vocab.symbols)
    out = args.out or MODELS_DIR / f"kgram-{corpus_name(args.corpus)}-k{args.order}.json"
    save_kgram(model, out)
    print(f"Saved order-{args.order} model ({len(model.counts)} contexts) to {out}")
    return 0


SKIPGRAM_COLUMNS = ("corpus", "gamma", "cs_mean", "cs_stderr", "perm_mean", "perm_stderr", "pairs", "final_loss")


def cmd_skipgram(args) -> int:
    seed = resolve_seed(args)
    transcripts = load_corpus(args, seed)
    vocab = build_vocabulary(transcripts)
    seqs = training_sequences(transcripts, vocab)
    name = corpus_name(args.corpus)

    rows = []
    for g in args.gammas:
        emb = train_left_skipgram(seqs, g, dim=args.dim, epochs=args.epochs, learning_rate=args.lr,
                                  seed=seed, vocab_size=len(vocab), progress=True)
        true = pair_similarities(seqs, emb, g)
        perm = permutation_baseline(seqs, emb, g, seed=seed)
        rows.append({
            "corpus": name, "gamma": g,
            "cs_mean": true.mean, "cs_stderr": true.stderr,
            "perm_mean": perm.mean, "perm_stderr": perm.stderr,
            "pairs": len(true.values),
            "final_loss": emb.losses[-1] if emb.losses else None,
        })
        if args.save_embedding:
            path = Path(args.save_embedding) / f"skipgram-{name}-g{g}.safetensors"
            save_embedding(emb, path)
            logger.info("Saved embedding to %s", path)

    out = out_path(args, f"skipgram-{name}")
    write_records(out, rows, args.format, columns=SKIPGRAM_COLUMNS)
    print(f"Wrote {len(rows)} rows to {out}")
    for r in rows:
        print(f"  gamma={r['gamma']:<3d} CS={r['cs_mean']:.4f} (+-{r['cs_stderr']:.4f})  "
              f"permuted={r['perm_mean']:.4f}")
    return 0


REPORT_METRICS = ("sim_tps", "pct_copied", "tau1", "tau2")


def _turn_key(turn) -> Tuple[int, str]:
    return (1, str(turn)) if isinstance(turn, str) else (0, f"{turn:06d}")


def build_report(records: Sequence[Dict], with_speedup: bool = True) -> List[Dict]:
    rows = [r for r in records if r.get("kind") == "aggregate" and r.get("category") is None]
    if not rows:
        raise CopySpecError("no aggregate records found; pass files written by 'run'")
    corpora = sorted({str(r.get("corpus")) for r in rows})
    if len(corpora) > 1:
        logger.warning("report mixes records from different corpora: %s", ", ".join(corpora))

    baselines = {(str(r.get("corpus")), r["turn"]): metrics_from_record(r)
                 for r in rows if r["strategy"] == Strategy.BASELINE.value}
    table = []
    for r in sorted(rows, key=lambda r: (str(r.get("corpus")), _turn_key(r["turn"]), r["strategy"])):
        corpus = str(r.get("corpus"))
        row = {"corpus": corpus, "strategy": r["strategy"], "turn": r["turn"]}
        row.update({m: r[m] for m in REPORT_METRICS})
        if with_speedup:
            base = baselines.get((corpus, r["turn"]))
            if base is None:
                raise MissingBaseline(str(r["turn"]), corpus)
            row["speedup"] = speedup(metrics_from_record(r), base)
        table.append(row)
    return table


def format_table(table: Sequence[Dict], markdown: bool = False) -> str:
    cols = list(table[0].keys())

    def cell(v):
        return f"{v:.4f}" if isinstance(v, float) else str(v)

    body = [[cell(row[c]) for c in cols] for row in table]
    if markdown:
        lines = ["| " + " | ".join(cols) + " |", "|" + "|".join("---" for _ in cols) + "|"]
        lines += ["| " + " | ".join(r) + " |" for r in body]
        return "\n".join(lines) + "\n"
    widths = [max(len(c), *(len(r[i]) for r in body)) for i, c in enumerate(cols)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(cols, widths))]
    lines += ["  ".join(v.ljust(w) for v, w in zip(r, widths)) for r in body]
    return "\n".join(lines) + "\n"


def cmd_report(args) -> int:
    records = []
    for path in args.paths:
        records.extend(read_records(path))
    table = build_report(records, with_speedup=not args.no_speedup)
    print(format_table(table), end="")
    if args.markdown:
        atomic_write_text(args.markdown, format_table(table, markdown=True))
        print(f"Wrote markdown table to {args.markdown}")
    return 0


STATS_COLUMNS = ("category", "transcripts", "turns", "user_tokens", "reference_tokens", "redundancy")


def cmd_stats(args) -> int:
    seed = resolve_seed(args)
    transcripts = load_corpus(args, seed)
    vocab = build_vocabulary(transcripts)
    rows = corpus_stats(transcripts, vocab, gamma=args.gamma)
    print(format_table(rows), end="")
    print(f"vocabulary: {len(vocab)} symbols")
    if args.out:
        write_records(args.out, rows, args.format, columns=STATS_COLUMNS)
        print(f"Wrote {len(rows)} rows to {args.out}")
    return 0


COMMANDS = {
    "run": cmd_run,
    "sweep": cmd_sweep,
    "train-lm": cmd_train_lm,
    "skipgram": cmd_skipgram,
    "report": cmd_report,
    "stats": cmd_stats,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = parse_args(argv)
    except ConfigError as e:
        print(f"copyspec: error: {e}", file=sys.stderr)
        return 2
    except SystemExit as e:
        return int(e.code or 0)

    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.INFO), format=LOG_FORMAT)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"copyspec: error: {e}", file=sys.stderr)
        return 2
    except (CopySpecError, OSError) as e:
        print(f"copyspec: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
