"""Local next-line code suggestion engine.

A code corpus is modeled as a weighted undirected graph of line transitions,
line embeddings are trained with skip-gram hierarchical softmax over biased
random walks, and suggestions are served from a compact float16 vector index
with a lexical text-similarity fallback for unknown lines.
"""

from .corpus import LanguageProfile, LineSequence, normalize_line, scan_corpus, segment_blocks
from .embedder import EmbeddingModel, TrainConfig, build_huffman, train_skipgram_hs
from .errors import NextlineError
from .evalbench import EvalReport, ScalingRow, bench_scaling, evaluate_topk
from .fallback import LexicalEmbedderConfig, PcaModel, embed_text, fit_pca, resolve_oov
from .graph import Vocabulary, accumulate_edges, build_vocabulary, write_edge_shards
from .mapstore import MapStore
from .pipeline import TrainSettings, train_pipeline
from .service import ArtifactBundle, Suggestion, load_bundle, serve_http, suggest
from .vecindex import VectorIndex, build_index, load_index, save_index, search
from .walker import AdjacencyView, WalkConfig, generate_walks, transition_distribution

__version__ = "0.1.0"

__all__ = [
    "AdjacencyView",
    "ArtifactBundle",
    "EmbeddingModel",
    "EvalReport",
    "LanguageProfile",
    "LexicalEmbedderConfig",
    "LineSequence",
    "MapStore",
    "NextlineError",
    "PcaModel",
    "ScalingRow",
    "Suggestion",
    "TrainConfig",
    "TrainSettings",
    "VectorIndex",
    "Vocabulary",
    "WalkConfig",
    "__version__",
    "accumulate_edges",
    "bench_scaling",
    "build_huffman",
    "build_index",
    "build_vocabulary",
    "embed_text",
    "evaluate_topk",
    "fit_pca",
    "generate_walks",
    "load_bundle",
    "load_index",
    "normalize_line",
    "resolve_oov",
    "save_index",
    "scan_corpus",
    "search",
    "segment_blocks",
    "serve_http",
    "suggest",
    "train_pipeline",
    "train_skipgram_hs",
    "transition_distribution",
    "write_edge_shards",
]
