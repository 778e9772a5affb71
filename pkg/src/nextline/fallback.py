"""Out-of-vocabulary resolution through a lexical text-embedding index.

Unknown lines are embedded as signed bags of hashed character n-grams in
384 dimensions, projected to the graph-embedding dimension with a PCA model
fitted on the vocabulary's own text embeddings, and matched against a
dedicated text index whose rows align with the main index ids. The nearest
row becomes the proxy node the graph-side suggestion query runs from.

The hashing embedder is deterministic and platform-stable by construction
(splitmix64 over polynomial window hashes), so the same line always lands on
the same buckets. Users who prefer an external neural encoder can load its
precomputed 384-d vectors from a .npy file instead and build the text index
from those; the PCA pipeline is identical either way.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
import struct

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigError, FormatError, InputError, ResolutionError
from .graph import Vocabulary
from .vecindex import VectorIndex, build_index, search

_PCA_MAGIC = b"NLPC"
_PCA_VERSION = 1
_PCA_HEADER = struct.Struct("<III")  # version, in_dim, out_dim

TEXT_DIM = 384
REDUCED_DIM = 128

_POLY = np.uint64(1099511628211)  # FNV-64 prime as the rolling-hash base
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_START_MARK = "\x02"
_END_MARK = "\x03"


@dataclass(frozen=True)
class LexicalEmbedderConfig:
    ngram_min: int = 3
    ngram_max: int = 5
    text_dim: int = TEXT_DIM
    hash_seed: int = 1

    def __post_init__(self) -> None:
        if not (1 <= self.ngram_min <= self.ngram_max):
            raise ConfigError("need 1 <= ngram_min <= ngram_max")
        if self.text_dim < 2:
            raise ConfigError("text_dim must be >= 2")


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def embed_text(line: str, cfg: LexicalEmbedderConfig) -> np.ndarray:
    """L2-normalized signed hashed bag of character n-grams, float32.

    The line is padded with boundary markers, every n-gram for n in
    [ngram_min, ngram_max] is hashed to a bucket with a deterministic +/-1
    sign, and the accumulated counts are normalized to unit length.
    """
    if not line:
        raise InputError("cannot embed an empty line")
    mask = (1 << 64) - 1
    padded = _START_MARK + line + _END_MARK
    codes = np.frombuffer(padded.encode("utf-8"), dtype=np.uint8).astype(np.uint64)
    vec = np.zeros(cfg.text_dim, dtype=np.float64)
    # scalar uint64 wraparound warns in numpy, so derive per-n salts in plain
    # ints and wrap explicitly; array ops below wrap silently as intended
    seed_base = int(_mix64_array(
        np.array([(cfg.hash_seed + int(_GOLDEN)) & mask], dtype=np.uint64)
    )[0])
    dim = np.uint64(cfg.text_dim)
    for n in range(cfg.ngram_min, cfg.ngram_max + 1):
        if len(codes) < n:
            break
        windows = sliding_window_view(codes, n)
        powers = np.empty(n, dtype=np.uint64)
        powers[0] = 1
        for j in range(1, n):
            powers[j] = (int(powers[j - 1]) * int(_POLY)) & mask
        salt = np.uint64((seed_base + n * int(_GOLDEN)) & mask)
        h = (windows * powers[::-1]).sum(axis=1, dtype=np.uint64)
        h = _mix64_array(h ^ salt)
        buckets = (h % dim).astype(np.int64)
        signs = 1.0 - 2.0 * ((h >> np.uint64(32)) & np.uint64(1)).astype(np.float64)
        vec += np.bincount(buckets, weights=signs, minlength=cfg.text_dim)
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        # all signed counts cancelled; fall back to a one-hot so the vector
        # stays a valid unit query
        vec[int(seed_base % dim)] = 1.0
        norm = 1.0
    return (vec / norm).astype(np.float32)


def embed_lines(lines, cfg: LexicalEmbedderConfig) -> np.ndarray:
    out = np.empty((len(lines), cfg.text_dim), dtype=np.float32)
    for i, line in enumerate(lines):
        out[i] = embed_text(line, cfg)
    return out


def load_precomputed_embeddings(path: Path, expected_count: int,
                                text_dim: int = TEXT_DIM) -> np.ndarray:
    """Load externally produced text embeddings (.npy, rows aligned to ids)."""
    arr = np.load(path, allow_pickle=False)
    if arr.ndim != 2 or arr.shape != (expected_count, text_dim):
        raise InputError(
            f"{path}: expected shape ({expected_count}, {text_dim}), got {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{path}: embeddings contain non-finite values")
    return arr.astype(np.float32)


@dataclass
class PcaModel:
    """Centered linear projection onto the top principal components."""

    mean: np.ndarray                # float64 (in_dim,)
    components: np.ndarray          # float64 (out_dim, in_dim), orthonormal rows
    explained_variance: np.ndarray  # float64 (out_dim,), non-increasing

    @property
    def in_dim(self) -> int:
        return self.mean.shape[0]

    @property
    def out_dim(self) -> int:
        return self.components.shape[0]


def fit_pca(samples: np.ndarray, out_dim: int,
            allow_rank_deficient: bool = False) -> PcaModel:
    """Fit PCA by eigendecomposition of the sample covariance.

    Components are the top out_dim eigenvectors in descending eigenvalue
    order, each row signed so its largest-magnitude entry is positive.
    Fitting normally requires more samples than components; pipelines over
    tiny vocabularies may opt in to a rank-deficient fit, where trailing
    components are an arbitrary orthonormal completion with ~zero variance.
    """
    samples = np.asarray(samples)
    if samples.ndim != 2:
        raise InputError("samples must be a 2-D matrix")
    n, in_dim = samples.shape
    if out_dim < 1 or out_dim > in_dim:
        raise ConfigError(f"out_dim must be in [1, {in_dim}]")
    if not np.all(np.isfinite(samples)):
        raise InputError("samples contain non-finite values")
    if n < out_dim + 1 and not allow_rank_deficient:
        raise InputError(
            f"need at least {out_dim + 1} samples to fit {out_dim} components, got {n}"
        )
    if n < 2:
        raise InputError("need at least 2 samples to fit a covariance")

    # chunked float64 accumulation keeps memory flat for large sample sets
    total = np.zeros(in_dim, dtype=np.float64)
    sq = np.zeros((in_dim, in_dim), dtype=np.float64)
    for start in range(0, n, 8192):
        chunk = samples[start:start + 8192].astype(np.float64)
        total += chunk.sum(axis=0)
        sq += chunk.T @ chunk
    mean = total / n
    cov = (sq - n * np.outer(mean, mean)) / (n - 1)
    cov = (cov + cov.T) / 2.0

    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.arange(in_dim - 1, in_dim - 1 - out_dim, -1)
    variance = np.clip(eigvals[order], 0.0, None)
    components = eigvecs[:, order].T.copy()
    for r in range(out_dim):
        lead = int(np.argmax(np.abs(components[r])))
        if components[r, lead] < 0:
            components[r] = -components[r]
    return PcaModel(mean=mean, components=components, explained_variance=variance)


def reduce(model: PcaModel, v: np.ndarray) -> np.ndarray:
    """Project one vector (or a batch of rows) into component space."""
    v = np.asarray(v, dtype=np.float64)
    return (v - model.mean) @ model.components.T


def reconstruct(model: PcaModel, reduced: np.ndarray) -> np.ndarray:
    return np.asarray(reduced, dtype=np.float64) @ model.components + model.mean


def save_pca(model: PcaModel, path: Path) -> None:
    with open(path, "wb") as fh:
        fh.write(_PCA_MAGIC)
        fh.write(_PCA_HEADER.pack(_PCA_VERSION, model.in_dim, model.out_dim))
        fh.write(model.mean.astype("<f4").tobytes())
        fh.write(model.components.astype("<f4").tobytes())
        fh.write(model.explained_variance.astype("<f4").tobytes())


def load_pca(path: Path) -> PcaModel:
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _PCA_MAGIC:
            raise FormatError(f"{path}: bad PCA magic {magic!r}")
        header = fh.read(_PCA_HEADER.size)
        if len(header) != _PCA_HEADER.size:
            raise FormatError(f"{path}: truncated PCA header")
        version, in_dim, out_dim = _PCA_HEADER.unpack(header)
        if version != _PCA_VERSION:
            raise FormatError(f"{path}: PCA version {version}, expected {_PCA_VERSION}")
        body = fh.read()
    expected = 4 * (in_dim + out_dim * in_dim + out_dim)
    if len(body) != expected:
        raise FormatError(f"{path}: PCA payload is {len(body)} bytes, expected {expected}")
    floats = np.frombuffer(body, dtype="<f4")
    mean = floats[:in_dim].astype(np.float64)
    components = (floats[in_dim:in_dim + out_dim * in_dim]
                  .reshape(out_dim, in_dim).astype(np.float64))
    variance = floats[in_dim + out_dim * in_dim:].astype(np.float64)
    return PcaModel(mean=mean, components=components, explained_variance=variance)


def sample_fit_lines(vocab: Vocabulary, count: int, cap: int, seed: int) -> list[str]:
    """Uniform seeded sample of indexed lines used to fit the PCA."""
    count = min(count, len(vocab))
    if count <= cap:
        return vocab.id_to_line[:count]
    rng = np.random.default_rng(seed)
    picks = np.sort(rng.choice(count, size=cap, replace=False))
    return [vocab.id_to_line[int(i)] for i in picks]


def build_text_index(
    vocab: Vocabulary,
    cfg: LexicalEmbedderConfig,
    pca: PcaModel,
    top_n: int,
    text_vectors: np.ndarray | None = None,
) -> VectorIndex:
    """Reduced text embedding per indexed line, stored half precision.

    Row i corresponds to vocabulary id i, matching the main index alignment.
    Supplying text_vectors (count x text_dim) bypasses the lexical embedder.
    """
    count = min(top_n, len(vocab))
    rows = np.empty((count, pca.out_dim), dtype=np.float32)
    chunk = 8192
    for start in range(0, count, chunk):
        stop = min(start + chunk, count)
        if text_vectors is not None:
            raw = text_vectors[start:stop]
        else:
            raw = embed_lines(vocab.id_to_line[start:stop], cfg)
        rows[start:stop] = reduce(pca, raw).astype(np.float32)
    return build_index(rows)


def resolve_oov(
    line: str,
    text_index: VectorIndex,
    pca: PcaModel,
    cfg: LexicalEmbedderConfig,
) -> int:
    """Id of the textually closest vocabulary line (top-1 in the text index)."""
    if text_index.count == 0:
        raise ResolutionError("text index is empty; cannot resolve unknown lines")
    query = reduce(pca, embed_text(line, cfg)).astype(np.float32)
    return search(text_index, query, 1)[0].id
