"""
Command-line entry point.

    biopars train --corpus FILE --steps N --d INT --blocks INT --chunk INT --seed INT --out ckpt
    biopars score --input qa.jsonl --metrics rouge-l,bertscore --hash-embed --setting zs --out report.csv

Exit codes: 0 success, 1 other package error, 2 configuration error, 3 input error
(including an unwritable output path).
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from pydantic import ValidationError

from biopars import __version__
from biopars.config import METRIC_VERSIONS, ScoreConfig, TrainConfig
from biopars.errors import BioparsError, ConfigurationError, InputError
from biopars.harness.evaluation import run_eval
from biopars.harness.records import load_records
from biopars.harness.report import render_report
from biopars.metrics.embeddings import EmbeddingStore
from biopars.models.checkpoint import save_checkpoint
from biopars.models.lm import ByteVocab
from biopars.training.corpus import load_corpus, make_windows
from biopars.training.trainer import build_model, train, write_loss_history

logger = logging.getLogger("biopars")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_INPUT = 3

FORMATS = {"csv": "csv", "md": "markdown", "markdown": "markdown"}


def _metric_list(value: str) -> list[str]:
    metrics = [m.strip() for m in value.split(",") if m.strip()]
    if not metrics:
        raise argparse.ArgumentTypeError("at least one metric is required")
    return metrics


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="biopars", description="Moving-average gated encoders and QA answer scoring")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="YAML file; command-line flags override it")
    common.add_argument("--verbose", action="store_true", help="Debug logging")
    common.add_argument("--quiet", action="store_true", help="No progress bars, warnings only")

    tr = sub.add_parser("train", parents=[common], help="Train a toy byte-level language model")
    tr.add_argument("--corpus", type=Path, required=True, help="UTF-8 text file")
    tr.add_argument("--steps", type=int, default=None)
    tr.add_argument("--d", type=int, default=None, help="Model width")
    tr.add_argument("--h", type=int, default=None, help="EMA expansion")
    tr.add_argument("--blocks", type=int, default=None)
    tr.add_argument("--chunk", type=int, default=None, help="Attention chunk length")
    tr.add_argument("--norm", choices=["timestep", "layer"], default=None)
    tr.add_argument("--window", type=int, default=None, help="Tokens per training window")
    tr.add_argument("--lr", type=float, default=None)
    tr.add_argument("--seed", type=int, default=None)
    tr.add_argument("--out", type=Path, required=True, help="Checkpoint path")
    tr.add_argument("--loss-csv", type=Path, default=None, help="Loss history (default: <out>.loss.csv)")

    sc = sub.add_parser("score", parents=[common], help="Score candidate answers against references")
    sc.add_argument("--input", type=Path, required=True, help="QA records, one JSON object per line")
    sc.add_argument(
        "--metrics", type=_metric_list, default=None, help=f"Comma-separated subset of {','.join(METRIC_VERSIONS)}"
    )
    emb = sc.add_mutually_exclusive_group()
    emb.add_argument("--embeddings", type=Path, default=None, help="JSON embedding sidecar")
    emb.add_argument("--hash-embed", action="store_true", default=None, help="Use the deterministic hash embedder")
    sc.add_argument("--setting", choices=["zs", "sim", "mmr"], default=None)
    sc.add_argument("--system", default=None, help="Column label in Markdown tables")
    sc.add_argument("--mmr-lambda", type=float, default=None)
    sc.add_argument("--mmr-k", type=int, default=None)
    sc.add_argument("--beta", type=float, default=None)
    sc.add_argument("--ngram", type=int, default=None)
    sc.add_argument("--seed", type=int, default=None)
    sc.add_argument("--format", choices=sorted(FORMATS), default="csv")
    sc.add_argument("--out", type=Path, required=True)
    return parser


def _load_config(model, path: Optional[Path], overrides: dict):
    try:
        if path is not None:
            return model.from_yaml(path, **overrides)
        return model.model_validate({k: v for k, v in overrides.items() if v is not None})
    except ValidationError as e:
        raise ConfigurationError(f"invalid configuration: {e}")
    except OSError as e:
        raise ConfigurationError(f"cannot read configuration {path}: {e}")


def _show_progress(args) -> bool:
    return not args.quiet and sys.stdout.isatty()


def _check_writable(path: Path) -> None:
    if not path.parent.exists() or path.is_dir():
        raise OSError(f"cannot write to {path}")


def cmd_train(args) -> int:
    cfg = _load_config(
        TrainConfig,
        args.config,
        {
            "steps": args.steps,
            "d": args.d,
            "h": args.h,
            "blocks": args.blocks,
            "chunk": args.chunk,
            "norm": args.norm,
            "window": args.window,
            "lr": args.lr,
            "seed": args.seed,
        },
    )
    loss_csv = args.loss_csv or args.out.with_name(args.out.name + ".loss.csv")
    _check_writable(args.out)
    _check_writable(loss_csv)

    data = load_corpus(args.corpus)
    vocab = ByteVocab.from_corpus(data)
    windows = make_windows(vocab.encode(data), cfg.window)
    model = build_model(cfg, vocab)
    print(f"Training {cfg.blocks} block(s) of width {cfg.d} on {len(windows)} windows, vocabulary {vocab.size}")

    result = train(model, windows, cfg, progress=_show_progress(args))
    save_checkpoint(result.model, args.out)
    write_loss_history(result.history, loss_csv)
    print(f"Final loss {result.eval_loss:.4f}, perplexity {result.eval_perplexity:.3f}")
    print(f"Checkpoint saved as {args.out}, loss history as {loss_csv}")
    return EXIT_OK


def cmd_score(args) -> int:
    cfg = _load_config(
        ScoreConfig,
        args.config,
        {
            "metrics": args.metrics,
            "setting": args.setting,
            "system": args.system,
            "mmr_lambda": args.mmr_lambda,
            "mmr_k": args.mmr_k,
            "beta": args.beta,
            "ngram": args.ngram,
            "seed": args.seed,
            "hash_embed": args.hash_embed,
        },
    )
    _check_writable(args.out)
    records = load_records(args.input)
    store = EmbeddingStore(str(args.embeddings)) if args.embeddings is not None else None
    report = run_eval(records, cfg, store, progress=_show_progress(args))
    render_report(report, FORMATS[args.format], args.out)
    for metric in report.metrics:
        print(f"{metric}: {report.aggregate_cell(metric)}")
    print(f"Report saved as {args.out}")
    return EXIT_OK


COMMANDS = {"train": cmd_train, "score": cmd_score}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s: %(message)s")

    try:
        return COMMANDS[args.command](args)
    except ConfigurationError as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except InputError as e:
        print(f"Input error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except BioparsError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
