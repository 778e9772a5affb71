"""Command-line entry points: train, suggest, serve, eval, bench."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .corpus import BLANK_LINE, NONE, LanguageProfile, load_sequence, scan_corpus
from .embedder import TrainConfig
from .errors import (
    ArtifactError,
    BenchError,
    ConfigError,
    EvalError,
    FormatError,
    InputError,
    IntegrityError,
    InternalError,
    NextlineError,
    ParseError,
    ResolutionError,
    StoreError,
    TrainingError,
)
from .evalbench import (
    BenchSettings,
    bench_scaling,
    emit_report,
    evaluate_topk,
)
from .fallback import LexicalEmbedderConfig
from .pipeline import TrainSettings, train_pipeline
from .service import load_bundle, serve_http, suggest
from .walker import WalkConfig

EXIT_CODES: list[tuple[type[NextlineError], int]] = [
    (InputError, 2),
    (ConfigError, 3),
    (ParseError, 4),
    (FormatError, 4),
    (ArtifactError, 5),
    (IntegrityError, 6),
    (TrainingError, 7),
    (StoreError, 8),
    (ResolutionError, 9),
    (EvalError, 10),
    (BenchError, 11),
    (InternalError, 12),
]


def _exit_code(exc: NextlineError) -> int:
    for cls, code in EXIT_CODES:
        if isinstance(exc, cls):
            return code
    return 1


def _profile_from_args(args) -> LanguageProfile:
    return LanguageProfile(
        line_comment_marker=args.comment_marker,
        file_extensions=tuple(args.extensions.split(",")),
    )


def _settings_from_args(args) -> TrainSettings:
    settings = TrainSettings.with_seed(args.seed)
    settings.profile = _profile_from_args(args)
    settings.separator = args.separator
    settings.walk = WalkConfig(p=args.p, q=args.q, num_walks=args.num_walks,
                               walk_length=args.walk_length, seed=args.seed)
    settings.train = TrainConfig(
        vector_size=args.dim, window=args.window, min_count=args.min_count,
        workers=args.workers, epochs=args.epochs, initial_lr=args.lr,
        min_lr=args.min_lr, seed=args.seed + 1,
    )
    settings.lex = LexicalEmbedderConfig(hash_seed=args.seed + 2)
    settings.top_n = args.top_n
    settings.max_edges_per_shard = args.shard_size
    return settings


def _holdout_split(files: list, fraction: float = 0.1) -> tuple[list, list]:
    """Deterministic file split: last `fraction` of the sorted list is held out."""
    cut = max(1, int(len(files) * (1 - fraction)))
    return files[:cut], files[cut:]


def cmd_train(args) -> int:
    settings = _settings_from_args(args)
    corpus_dir = Path(args.corpus)
    if args.holdout:
        files = scan_corpus(corpus_dir, settings.profile)
        train_files, held = _holdout_split(files)
        print(f"holdout: training on {len(train_files)} files, "
              f"holding out {len(held)}")
        import shutil
        import tempfile

        with tempfile.TemporaryDirectory(prefix="nextline-holdout-") as tmp:
            for f in train_files:
                target = Path(tmp) / f.relative_to(corpus_dir)
                target.parent.mkdir(parents=True, exist_ok=True)
                shutil.copy2(f, target)
            manifest = train_pipeline(tmp, args.out, settings,
                                      keep_workdir=args.keep_work,
                                      text_embeddings_path=args.text_embeddings)
    else:
        manifest = train_pipeline(corpus_dir, args.out, settings,
                                  keep_workdir=args.keep_work,
                                  text_embeddings_path=args.text_embeddings)
    counts = manifest["counts"]
    print(f"trained {counts['indexed']} of {counts['vocab_size']} lines "
          f"({counts['edges']} edges) -> {args.out}")
    for name, info in sorted(manifest["artifacts"].items()):
        print(f"  {info['file']:<18} {info['bytes']:>12,} bytes")
    return 0


def cmd_suggest(args) -> int:
    bundle = load_bundle(args.artifacts)
    try:
        suggestions, oov = suggest(bundle, args.line, args.k)
    finally:
        bundle.close()
    if oov:
        print("(line is out of vocabulary; matched via text similarity)")
    for s in suggestions:
        print(f"{s.rank:>3}  {s.distance:<12.6g}  {s.line}")
    return 0


def cmd_serve(args) -> int:
    bundle = load_bundle(args.artifacts)
    ui_dir = Path(args.ui) if args.ui else None
    serve_http(bundle, host=args.host, port=args.port, ui_dir=ui_dir)
    return 0


def cmd_eval(args) -> int:
    bundle = load_bundle(args.artifacts)
    try:
        profile = bundle.profile
        files = scan_corpus(Path(args.corpus), profile)
        if args.holdout:
            _, files = _holdout_split(files)
            print(f"holdout: evaluating on {len(files)} held-out files")
        sequences = (load_sequence(f, profile) for f in files)
        ks = tuple(int(k) for k in args.ks.split(","))
        report = evaluate_topk(bundle, sequences, ks)
    finally:
        bundle.close()
    for k in sorted(report.accuracy):
        print(f"top-{k:<3} {report.accuracy[k]:.4f}")
    print(f"transitions evaluated: {report.transitions_evaluated} "
          f"(skipped OOV: {report.oov_transitions_skipped})")
    if args.out:
        emit_report(report, Path(args.out), args.format)
        print(f"report written to {args.out}")
    return 0


def cmd_bench(args) -> int:
    sizes = [int(s) for s in args.sizes.split(",")]
    settings = BenchSettings(epochs=args.epochs, num_walks=args.num_walks,
                             seed=args.seed, queries=args.queries)
    rows = bench_scaling(sizes, Path(args.out), settings)
    print(f"{'vocab':>10} {'artifact MB':>12} {'peak RSS MB':>12} {'ms/query':>10}")
    for row in rows:
        print(f"{row.vocab_size:>10} {row.artifact_bytes / 1e6:>12.1f} "
              f"{row.peak_resident_bytes / 1e6:>12.1f} "
              f"{row.mean_query_seconds * 1e3:>10.2f}")
    report_path = Path(args.out) / f"scaling.{args.format}"
    emit_report(rows, report_path, args.format, meta=settings.to_dict())
    print(f"report written to {report_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nextline",
        description="Next-line code suggestions from a line-transition graph.",
    )
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="enable info-level logging")
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="train artifacts from a code corpus")
    train.add_argument("--corpus", required=True, help="corpus root directory")
    train.add_argument("--out", required=True, help="artifact output directory")
    train.add_argument("--p", type=float, default=1.0)
    train.add_argument("--q", type=float, default=0.5)
    train.add_argument("--num-walks", type=int, default=10)
    train.add_argument("--walk-length", type=int, default=10)
    train.add_argument("--dim", type=int, default=128)
    train.add_argument("--window", type=int, default=5)
    train.add_argument("--epochs", type=int, default=100)
    train.add_argument("--min-count", type=int, default=1)
    train.add_argument("--lr", type=float, default=0.025)
    train.add_argument("--min-lr", type=float, default=0.0001)
    train.add_argument("--workers", type=int, default=1)
    train.add_argument("--top-n", type=int, default=1_000_000)
    train.add_argument("--shard-size", type=int, default=10_000_000)
    train.add_argument("--seed", type=int, default=42)
    train.add_argument("--separator", choices=[BLANK_LINE, NONE], default=BLANK_LINE)
    train.add_argument("--comment-marker", default="#")
    train.add_argument("--extensions", default=".py",
                       help="comma-separated file extensions")
    train.add_argument("--holdout", action="store_true",
                       help="train on the first 90%% of files (sorted)")
    train.add_argument("--keep-work", action="store_true",
                       help="keep intermediate edge shards")
    train.add_argument("--text-embeddings", default=None,
                       help=".npy of precomputed 384-d text embeddings")
    train.set_defaults(func=cmd_train)

    sug = sub.add_parser("suggest", help="one-shot suggestion for a line")
    sug.add_argument("--artifacts", required=True)
    sug.add_argument("--line", required=True)
    sug.add_argument("--k", type=int, default=10)
    sug.set_defaults(func=cmd_suggest)

    serve = sub.add_parser("serve", help="serve suggestions over HTTP")
    serve.add_argument("--artifacts", required=True)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8640)
    serve.add_argument("--ui", default=None,
                       help="static directory to serve at / (the playground build)")
    serve.set_defaults(func=cmd_serve)

    ev = sub.add_parser("eval", help="top-k accuracy over a corpus")
    ev.add_argument("--artifacts", required=True)
    ev.add_argument("--corpus", required=True)
    ev.add_argument("--ks", default="1,3,10")
    ev.add_argument("--holdout", action="store_true",
                    help="evaluate only the last 10%% of files (sorted)")
    ev.add_argument("--out", default=None, help="report file")
    ev.add_argument("--format", choices=["json", "csv"], default="json")
    ev.set_defaults(func=cmd_eval)

    bench = sub.add_parser("bench", help="artifact/memory/latency scaling runs")
    bench.add_argument("--sizes", default="25000,50000,100000,200000",
                       help="comma-separated vocabulary sizes (ascending)")
    bench.add_argument("--out", required=True, help="working/output directory")
    bench.add_argument("--queries", type=int, default=1000)
    bench.add_argument("--epochs", type=int, default=1)
    bench.add_argument("--num-walks", type=int, default=5)
    bench.add_argument("--seed", type=int, default=97)
    bench.add_argument("--format", choices=["json", "csv"], default="json")
    bench.set_defaults(func=cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except NextlineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
