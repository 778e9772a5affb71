"""Skip-gram training with hierarchical softmax over the walk corpus.

Implemented from scratch: a Huffman tree over token frequencies supplies a
prefix code per token, and each (center, context) pair inside a randomly
shrunk window updates the center's input vector against the internal-node
vectors along the context token's code path. The per-node loss is
-[b*log(1-s) + (1-b)*log(s)] with s = sigmoid(v_center . u_node), whose
gradient descent step is exactly the classic g = (1 - b - s) * lr update.
"""

from __future__ import annotations

import heapq
import logging
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit, prange, set_num_threads, get_num_threads

from ._rng import GOLDEN, mix64
from .errors import ConfigError, FormatError, TrainingError
from .graph import Vocabulary
from .walker import Walks

logger = logging.getLogger(__name__)

_CHECKPOINT_MAGIC = b"NLEM"
_CHECKPOINT_VERSION = 1


def _default_workers() -> int:
    return max(1, (os.cpu_count() or 2) - 1)


@dataclass(frozen=True)
class TrainConfig:
    vector_size: int = 128
    window: int = 5
    min_count: int = 1
    workers: int = field(default_factory=_default_workers)
    use_skipgram: bool = True            # fixed; CBOW is out of scope
    use_hierarchical_softmax: bool = True  # fixed; negative sampling is out of scope
    epochs: int = 100
    initial_lr: float = 0.025
    min_lr: float = 0.0001
    seed: int = 1

    def __post_init__(self) -> None:
        if self.vector_size < 1:
            raise ConfigError("vector_size must be >= 1")
        if self.window < 1:
            raise ConfigError("window must be >= 1")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if not (self.initial_lr > self.min_lr > 0):
            raise ConfigError("need initial_lr > min_lr > 0")
        if self.min_count < 1:
            raise ConfigError("min_count must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if not self.use_skipgram or not self.use_hierarchical_softmax:
            raise ConfigError("only skip-gram with hierarchical softmax is supported")


@dataclass
class HuffmanTree:
    """Per-token prefix code and root-to-parent path of internal node indices."""

    codes: np.ndarray         # uint8 (V, max_depth)
    points: np.ndarray        # int32 (V, max_depth)
    code_lengths: np.ndarray  # int32 (V,)

    @property
    def internal_count(self) -> int:
        return self.codes.shape[0] - 1

    def code_of(self, token: int) -> list[int]:
        return [int(b) for b in self.codes[token, : self.code_lengths[token]]]

    def path_of(self, token: int) -> list[int]:
        return [int(p) for p in self.points[token, : self.code_lengths[token]]]

    def weighted_code_length(self, freq: np.ndarray) -> int:
        return int((self.code_lengths * np.asarray(freq)).sum())


def build_huffman(freq) -> HuffmanTree:
    """Standard Huffman construction with deterministic tie-breaking.

    Heap entries order by (count, key); leaf keys are token ids and internal
    keys are assigned in creation order above all leaf ids, so equal-weight
    subtrees always merge lowest-id first. The first-popped child takes code
    bit 0.
    """
    if isinstance(freq, dict):
        size = max(freq) + 1
        counts = np.zeros(size, dtype=np.int64)
        for token, c in freq.items():
            counts[token] = c
    else:
        counts = np.asarray(freq, dtype=np.int64)
    num_tokens = len(counts)
    if num_tokens < 2:
        raise ConfigError("hierarchical softmax needs a vocabulary of at least 2 tokens")

    heap: list[tuple[int, int]] = [(int(counts[i]), i) for i in range(num_tokens)]
    heapq.heapify(heap)
    left = np.empty(num_tokens - 1, dtype=np.int64)
    right = np.empty(num_tokens - 1, dtype=np.int64)
    for inner in range(num_tokens - 1):
        c1, k1 = heapq.heappop(heap)
        c2, k2 = heapq.heappop(heap)
        left[inner] = k1
        right[inner] = k2
        heapq.heappush(heap, (c1 + c2, num_tokens + inner))

    # walk down from the root assigning codes; keys >= num_tokens are internal
    codes_per_token: list[list[int]] = [[] for _ in range(num_tokens)]
    points_per_token: list[list[int]] = [[] for _ in range(num_tokens)]
    root = num_tokens + (num_tokens - 2)
    stack: list[tuple[int, list[int], list[int]]] = [(root, [], [])]
    while stack:
        key, code, path = stack.pop()
        if key < num_tokens:
            codes_per_token[key] = code
            points_per_token[key] = path
            continue
        inner = key - num_tokens
        child_path = path + [inner]
        stack.append((int(left[inner]), code + [0], child_path))
        stack.append((int(right[inner]), code + [1], child_path))

    max_depth = max(len(c) for c in codes_per_token)
    codes = np.zeros((num_tokens, max_depth), dtype=np.uint8)
    points = np.zeros((num_tokens, max_depth), dtype=np.int32)
    code_lengths = np.zeros(num_tokens, dtype=np.int32)
    for token in range(num_tokens):
        depth = len(codes_per_token[token])
        code_lengths[token] = depth
        codes[token, :depth] = codes_per_token[token]
        points[token, :depth] = points_per_token[token]
    return HuffmanTree(codes=codes, points=points, code_lengths=code_lengths)


@dataclass
class EmbeddingModel:
    """Input vectors per token plus trainable vectors for Huffman internals."""

    input_vectors: np.ndarray     # float32 (V, d)
    internal_vectors: np.ndarray  # float32 (V-1, d)
    epoch_losses: list[float] = field(default_factory=list)

    @property
    def vocab_size(self) -> int:
        return self.input_vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.input_vectors.shape[1]

    @classmethod
    def initialize(cls, vocab_size: int, dim: int, seed: int) -> "EmbeddingModel":
        rng = np.random.default_rng(seed)
        bound = 0.5 / dim
        inputs = rng.uniform(-bound, bound, size=(vocab_size, dim)).astype(np.float32)
        internals = np.zeros((max(vocab_size - 1, 1), dim), dtype=np.float32)
        return cls(input_vectors=inputs, internal_vectors=internals)

    def save(self, path: Path) -> None:
        with open(path, "wb") as fh:
            fh.write(_CHECKPOINT_MAGIC)
            fh.write(struct.pack("<III", _CHECKPOINT_VERSION,
                                 self.vocab_size, self.dim))
            fh.write(np.ascontiguousarray(self.input_vectors, dtype="<f4").tobytes())
            fh.write(np.ascontiguousarray(self.internal_vectors, dtype="<f4").tobytes())

    @classmethod
    def load(cls, path: Path) -> "EmbeddingModel":
        with open(path, "rb") as fh:
            magic = fh.read(4)
            if magic != _CHECKPOINT_MAGIC:
                raise FormatError(f"{path}: bad model magic {magic!r}")
            version, vocab_size, dim = struct.unpack("<III", fh.read(12))
            if version != _CHECKPOINT_VERSION:
                raise FormatError(
                    f"{path}: model version {version}, expected {_CHECKPOINT_VERSION}"
                )
            n_in = vocab_size * dim * 4
            n_internal = max(vocab_size - 1, 1) * dim * 4
            buf_in = fh.read(n_in)
            buf_internal = fh.read(n_internal)
            if len(buf_in) != n_in or len(buf_internal) != n_internal:
                raise FormatError(f"{path}: truncated model checkpoint")
        inputs = np.frombuffer(buf_in, dtype="<f4").reshape(vocab_size, dim).copy()
        internals = (np.frombuffer(buf_internal, dtype="<f4")
                     .reshape(max(vocab_size - 1, 1), dim).copy())
        return cls(input_vectors=inputs, internal_vectors=internals)


# --- analytic pair loss and gradients (float64; used by tests as the
# ground truth the finite-difference oracle is run against) ---

def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=np.float64)))


def hs_pair_loss(center_vec, internal_vecs, bits) -> float:
    """Loss of one (center, context) pair summed over the context's code path."""
    s = sigmoid(internal_vecs @ np.asarray(center_vec, dtype=np.float64))
    bits = np.asarray(bits, dtype=np.float64)
    return float(-(bits * np.log(1.0 - s) + (1.0 - bits) * np.log(s)).sum())


def hs_pair_gradients(center_vec, internal_vecs, bits):
    """Analytic d(loss)/d(center) and d(loss)/d(internal rows)."""
    center = np.asarray(center_vec, dtype=np.float64)
    internals = np.asarray(internal_vecs, dtype=np.float64)
    bits = np.asarray(bits, dtype=np.float64)
    s = sigmoid(internals @ center)
    coeff = s + bits - 1.0  # = -(1 - b - s)
    grad_center = internals.T @ coeff
    grad_internal = np.outer(coeff, center)
    return grad_center, grad_internal


@njit(cache=True, fastmath=True, inline="always")
def _train_center(walks, w, length, pos, gpos, window, lr, shrink_base,
                  syn0, syn1, codes, points, code_lens, neu, track_loss):
    """Process one center position; returns (loss_sum, pair_count)."""
    dim = syn0.shape[1]
    center = walks[w, pos]
    z = mix64(shrink_base + np.uint64(gpos) * GOLDEN)
    b = np.int64(z % np.uint64(window))
    start = pos - window + b
    if start < 0:
        start = 0
    end = pos + window + 1 - b
    if end > length:
        end = length
    loss = 0.0
    pairs = 0
    for pos2 in range(start, end):
        if pos2 == pos:
            continue
        ctx = walks[w, pos2]
        depth = code_lens[ctx]
        if depth == 0:
            continue
        pairs += 1
        for k in range(dim):
            neu[k] = np.float32(0.0)
        for j in range(depth):
            node = points[ctx, j]
            bit = codes[ctx, j]
            f = np.float32(0.0)
            for k in range(dim):
                f += syn0[center, k] * syn1[node, k]
            # saturate outside [-6, 6] like the classic sigmoid table: a pair
            # already on the right side of the decision gets zero gradient,
            # which is what keeps vector norms bounded over many epochs
            if f > np.float32(6.0):
                s = np.float32(1.0)
            elif f < np.float32(-6.0):
                s = np.float32(0.0)
            else:
                s = np.float32(1.0) / (np.float32(1.0) + np.exp(-f))
            g = (np.float32(1.0) - np.float32(bit) - s) * np.float32(lr)
            if track_loss:
                if bit == 1:
                    loss += -np.log(1.0 - np.float64(s) + 1e-12)
                else:
                    loss += -np.log(np.float64(s) + 1e-12)
            for k in range(dim):
                neu[k] += g * syn1[node, k]
            for k in range(dim):
                syn1[node, k] += g * syn0[center, k]
        for k in range(dim):
            syn0[center, k] += neu[k]
    return loss, pairs


@njit(cache=True, fastmath=True)
def _epoch_sequential(walks, lengths, token_offsets, epoch_base, total_positions,
                      lr0, lr1, window, shrink_base, syn0, syn1,
                      codes, points, code_lens, track_loss):
    loss = 0.0
    pairs = 0
    neu = np.empty(syn0.shape[1], dtype=np.float32)
    for w in range(walks.shape[0]):
        length = lengths[w]
        for pos in range(length):
            gpos = epoch_base + token_offsets[w] + pos
            lr = lr0 + (lr1 - lr0) * (gpos / total_positions)
            pl, pc = _train_center(walks, w, length, pos, gpos, window, lr,
                                   shrink_base, syn0, syn1, codes, points,
                                   code_lens, neu, track_loss)
            loss += pl
            pairs += pc
    return loss, pairs


@njit(cache=True, fastmath=True, parallel=True)
def _epoch_parallel(walks, lengths, token_offsets, epoch_base, total_positions,
                    lr0, lr1, window, shrink_base, syn0, syn1,
                    codes, points, code_lens, track_loss):
    # Hogwild-style: walk partitions update the shared matrices without
    # locking; component races are accepted. The lr schedule depends only on
    # the scheduled token position, not on processing order.
    loss = 0.0
    pairs = 0
    for w in prange(walks.shape[0]):
        neu = np.empty(syn0.shape[1], dtype=np.float32)
        length = lengths[w]
        wloss = 0.0
        wpairs = 0
        for pos in range(length):
            gpos = epoch_base + token_offsets[w] + pos
            lr = lr0 + (lr1 - lr0) * (gpos / total_positions)
            pl, pc = _train_center(walks, w, length, pos, gpos, window, lr,
                                   shrink_base, syn0, syn1, codes, points,
                                   code_lens, neu, track_loss)
            wloss += pl
            wpairs += pc
        loss += wloss
        pairs += wpairs
    return loss, pairs


def _filter_walks(walks: Walks, keep: np.ndarray) -> Walks:
    """Drop tokens below min_count, compacting each walk."""
    rows, width = walks.array.shape
    array = np.zeros_like(walks.array)
    lengths = np.zeros_like(walks.lengths)
    for r in range(rows):
        out = [t for t in walks.array[r, : walks.lengths[r]] if keep[t]]
        lengths[r] = len(out)
        array[r, : len(out)] = out
    return Walks(array=array, lengths=lengths, num_walks=walks.num_walks)


def train_skipgram_hs(
    walks: Walks,
    vocab: Vocabulary,
    cfg: TrainConfig,
    model: EmbeddingModel | None = None,
    tree: HuffmanTree | None = None,
    track_loss: bool = False,
) -> EmbeddingModel:
    """Train (or continue training) the embedding model on a walk corpus.

    Passing the model returned by a previous call continues training with the
    same matrices, which is how sharded corpora are handled: the vocabulary
    and Huffman tree stay global while each shard's walks get the full epoch
    loop. The learning rate decays linearly from initial_lr to min_lr across
    this call's scheduled token positions.

    With workers == 1 updates run in a fixed order and the result is
    bit-reproducible; with workers > 1 partitions race benignly on the shared
    matrices and only statistical quality is guaranteed.
    """
    vocab_size = len(vocab)
    if tree is None:
        tree = build_huffman(vocab.freq)
    if model is None:
        model = EmbeddingModel.initialize(vocab_size, cfg.vector_size, cfg.seed)
    if model.dim != cfg.vector_size:
        raise ConfigError(
            f"model dim {model.dim} does not match configured {cfg.vector_size}"
        )
    if model.vocab_size != vocab_size:
        raise ConfigError(
            f"model vocabulary {model.vocab_size} does not match corpus {vocab_size}"
        )
    if len(walks) == 0:
        return model

    if cfg.min_count > 1:
        keep = vocab.freq >= cfg.min_count
        walks = _filter_walks(walks, keep)

    total_tokens = walks.total_tokens()
    if total_tokens == 0:
        return model

    token_offsets = np.zeros(len(walks), dtype=np.int64)
    np.cumsum(walks.lengths[:-1], out=token_offsets[1:])
    total_positions = cfg.epochs * total_tokens
    # mix64 invoked from Python hands back a plain int; re-wrap so the kernel
    # argument stays a stable uint64 across calls
    shrink_base = np.uint64(
        mix64(np.uint64(cfg.seed & (2**64 - 1)) ^ np.uint64(0xA5A5A5A5A5A5A5A5))
    )

    kernel = _epoch_sequential if cfg.workers == 1 else _epoch_parallel
    previous_threads = get_num_threads()
    if cfg.workers > 1:
        set_num_threads(min(cfg.workers, previous_threads))
    try:
        for epoch in range(cfg.epochs):
            try:
                loss, pairs = kernel(
                    walks.array, walks.lengths, token_offsets,
                    epoch * total_tokens, total_positions,
                    cfg.initial_lr, cfg.min_lr, cfg.window, shrink_base,
                    model.input_vectors, model.internal_vectors,
                    tree.codes, tree.points, tree.code_lengths,
                    track_loss,
                )
            except (ZeroDivisionError, FloatingPointError) as exc:
                raise TrainingError(
                    f"numerical failure in epoch {epoch}: {exc}; "
                    "lower the learning rate"
                ) from exc
            if track_loss:
                model.epoch_losses.append(loss / pairs if pairs else 0.0)
            if not np.all(np.isfinite(model.input_vectors)) or not np.all(
                np.isfinite(model.internal_vectors)
            ):
                raise TrainingError(
                    f"non-finite values in model after epoch {epoch}; "
                    "lower the learning rate or inspect the walk corpus"
                )
    finally:
        if cfg.workers > 1:
            set_num_threads(previous_threads)
    return model


def extract_embeddings(
    model: EmbeddingModel, vocab: Vocabulary, top_n: int
) -> np.ndarray:
    """Rows for the min(top_n, V) most frequent lines, in id (frequency) order."""
    if top_n < 1:
        raise ConfigError("top_n must be >= 1")
    count = min(top_n, len(vocab))
    return model.input_vectors[:count].astype(np.float32, copy=True)
