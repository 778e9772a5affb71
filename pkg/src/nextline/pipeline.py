"""End-to-end training: corpus -> graph -> walks -> embeddings -> artifacts.

A successful run leaves exactly five artifacts plus a manifest in the output
directory:

    main_index.vix   graph-embedding vector index (float16 rows)
    text_index.vix   reduced lexical text-embedding index, id-aligned
    pca_model.pca    the 384 -> d projection used by the OOV path
    line_to_id.kvs   sorted table mapping line text to node id
    id_to_line.kvs   sorted table mapping node id to line text
    manifest.json    config, counts, and artifact inventory

Intermediate edge shards and the raw model live in a scratch directory that
is removed unless keep_workdir is set.
"""

from __future__ import annotations

import json
import logging
import shutil
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import BLANK_LINE, LanguageProfile, load_sequence, scan_corpus
from .embedder import TrainConfig, build_huffman, extract_embeddings, train_skipgram_hs
from .errors import InputError
from .fallback import (
    LexicalEmbedderConfig,
    build_text_index,
    fit_pca,
    load_precomputed_embeddings,
    sample_fit_lines,
    save_pca,
    embed_lines,
)
from .graph import (
    DEFAULT_MAX_EDGES_PER_SHARD,
    accumulate_edges,
    build_vocabulary,
    write_edge_shards,
)
from .mapstore import MapStore
from .vecindex import build_index, save_index
from .walker import WalkConfig, generate_walks, load_adjacency

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
MANIFEST_FORMAT_VERSION = 1

ARTIFACT_FILES = {
    "main_index": "main_index.vix",
    "text_index": "text_index.vix",
    "pca_model": "pca_model.pca",
    "line_to_id": "line_to_id.kvs",
    "id_to_line": "id_to_line.kvs",
}

TEXT_MODE_LEXICAL = "lexical"
TEXT_MODE_EXTERNAL = "external"


@dataclass
class TrainSettings:
    """Everything one training run needs, with one seed fanning out to all stages."""

    profile: LanguageProfile = field(default_factory=LanguageProfile)
    separator: str = BLANK_LINE
    walk: WalkConfig = field(default_factory=WalkConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    lex: LexicalEmbedderConfig = field(default_factory=LexicalEmbedderConfig)
    top_n: int = 1_000_000
    max_edges_per_shard: int = DEFAULT_MAX_EDGES_PER_SHARD
    pca_sample_cap: int = 100_000
    pca_sample_seed: int = 4

    @classmethod
    def with_seed(cls, seed: int, **overrides) -> "TrainSettings":
        settings = cls(**overrides)
        settings.walk = WalkConfig(
            p=settings.walk.p, q=settings.walk.q,
            num_walks=settings.walk.num_walks,
            walk_length=settings.walk.walk_length, seed=seed,
        )
        settings.train = TrainConfig(
            vector_size=settings.train.vector_size, window=settings.train.window,
            min_count=settings.train.min_count, workers=settings.train.workers,
            epochs=settings.train.epochs, initial_lr=settings.train.initial_lr,
            min_lr=settings.train.min_lr, seed=seed + 1,
        )
        settings.lex = LexicalEmbedderConfig(
            ngram_min=settings.lex.ngram_min, ngram_max=settings.lex.ngram_max,
            text_dim=settings.lex.text_dim, hash_seed=seed + 2,
        )
        settings.pca_sample_seed = seed + 3
        return settings


def artifact_paths(out_dir: Path) -> dict[str, Path]:
    out_dir = Path(out_dir)
    return {name: out_dir / fname for name, fname in ARTIFACT_FILES.items()}


def train_pipeline(
    corpus_dir: Path | str,
    out_dir: Path | str,
    settings: TrainSettings | None = None,
    keep_workdir: bool = False,
    text_embeddings_path: Path | None = None,
) -> dict:
    """Run the full training pipeline and return the manifest."""
    settings = settings or TrainSettings()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    workdir = out_dir / ".work"
    workdir.mkdir(exist_ok=True)

    files = scan_corpus(corpus_dir, settings.profile)
    logger.info("corpus: %d files under %s", len(files), corpus_dir)
    sequences = [load_sequence(p, settings.profile, settings.separator) for p in files]
    vocab = build_vocabulary(sequences)  # raises InputError on an empty corpus
    logger.info("vocabulary: %d distinct lines", len(vocab))

    acc = accumulate_edges(sequences, vocab)
    shards = write_edge_shards(acc, workdir, settings.max_edges_per_shard)
    if not shards:
        raise InputError("corpus has no line transitions; nothing to train on")
    logger.info("graph: %d edges across %d shard(s)", len(acc), len(shards))
    vocab.save(workdir / "vocabulary.tsv")  # debugging sidecar, lives with .work

    tree = build_huffman(vocab.freq)
    model = None
    for shard_idx, shard in enumerate(shards):
        adj = load_adjacency([shard], num_nodes=len(vocab))
        walk_cfg = WalkConfig(
            p=settings.walk.p, q=settings.walk.q,
            num_walks=settings.walk.num_walks,
            walk_length=settings.walk.walk_length,
            seed=settings.walk.seed + shard_idx,
        )
        walks = generate_walks(adj, walk_cfg)
        logger.info("shard %d: %d walks, %d tokens",
                    shard_idx, len(walks), walks.total_tokens())
        model = train_skipgram_hs(walks, vocab, settings.train, model=model, tree=tree)

    table = extract_embeddings(model, vocab, settings.top_n)
    indexed = table.shape[0]
    paths = artifact_paths(out_dir)

    main_index = build_index(table)
    save_index(main_index, paths["main_index"])

    MapStore.create(
        ((vocab.id_to_line[i], i) for i in range(indexed)),
        paths["line_to_id"], paths["id_to_line"],
    ).close()

    out_dim = settings.train.vector_size
    if text_embeddings_path is not None:
        text_mode = TEXT_MODE_EXTERNAL
        text_vectors = load_precomputed_embeddings(
            Path(text_embeddings_path), indexed, settings.lex.text_dim)
        fit_samples = _sample_rows(text_vectors, settings.pca_sample_cap,
                                   settings.pca_sample_seed)
    else:
        text_mode = TEXT_MODE_LEXICAL
        text_vectors = None
        fit_lines = sample_fit_lines(vocab, indexed, settings.pca_sample_cap,
                                     settings.pca_sample_seed)
        fit_samples = embed_lines(fit_lines, settings.lex)

    allow_deficient = fit_samples.shape[0] < out_dim + 1
    if allow_deficient:
        logger.warning(
            "only %d lines available to fit %d PCA components; trailing "
            "components will carry no variance", fit_samples.shape[0], out_dim,
        )
    pca = fit_pca(fit_samples, out_dim, allow_rank_deficient=allow_deficient)
    save_pca(pca, paths["pca_model"])

    text_index = build_text_index(vocab, settings.lex, pca, settings.top_n,
                                  text_vectors=text_vectors)
    save_index(text_index, paths["text_index"])

    manifest = {
        "format": "nextline-artifacts",
        "format_version": MANIFEST_FORMAT_VERSION,
        "text_mode": text_mode,
        "config": {
            "profile": {
                "line_comment_marker": settings.profile.line_comment_marker,
                "string_delimiters": list(settings.profile.string_delimiters),
                "file_extensions": list(settings.profile.file_extensions),
            },
            "separator": settings.separator,
            "walk": {
                "p": settings.walk.p, "q": settings.walk.q,
                "num_walks": settings.walk.num_walks,
                "walk_length": settings.walk.walk_length,
                "seed": settings.walk.seed,
            },
            "train": {
                "vector_size": settings.train.vector_size,
                "window": settings.train.window,
                "min_count": settings.train.min_count,
                "epochs": settings.train.epochs,
                "initial_lr": settings.train.initial_lr,
                "min_lr": settings.train.min_lr,
                "seed": settings.train.seed,
            },
            "lexical": {
                "ngram_min": settings.lex.ngram_min,
                "ngram_max": settings.lex.ngram_max,
                "text_dim": settings.lex.text_dim,
                "hash_seed": settings.lex.hash_seed,
            },
            "top_n": settings.top_n,
            "max_edges_per_shard": settings.max_edges_per_shard,
            "pca_sample_cap": settings.pca_sample_cap,
            "pca_sample_seed": settings.pca_sample_seed,
        },
        "counts": {
            "files": len(files),
            "retained_lines": sum(s.line_count() for s in sequences),
            "vocab_size": len(vocab),
            "indexed": indexed,
            "edges": len(acc),
            "total_edge_weight": acc.total_weight(),
            "shards": len(shards),
            "dim": out_dim,
        },
        "artifacts": {
            name: {"file": ARTIFACT_FILES[name],
                   "bytes": paths[name].stat().st_size}
            for name in ARTIFACT_FILES
        },
    }
    manifest_path = out_dir / MANIFEST_NAME
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                             encoding="utf-8")
    if not keep_workdir:
        shutil.rmtree(workdir)
    logger.info("artifacts written to %s", out_dir)
    return manifest


def _sample_rows(matrix, cap: int, seed: int):
    if matrix.shape[0] <= cap:
        return matrix
    rng = np.random.default_rng(seed)
    picks = np.sort(rng.choice(matrix.shape[0], size=cap, replace=False))
    return matrix[picks]
