"""Vocabulary construction and the weighted undirected line-transition graph.

Every distinct normalized line becomes a node; consecutive lines within a
block contribute weight to one undirected edge. Edges are written to sharded
.edg text files (u<TAB>v<TAB>w, ids canonical u < v, sorted) so very large
graphs never need to sit in memory at once.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .corpus import LineSequence
from .errors import InputError, InternalError, ParseError

DEFAULT_MAX_EDGES_PER_SHARD = 10_000_000
SHARD_SUFFIX = ".edg"


@dataclass
class Vocabulary:
    """Bijection between normalized lines and contiguous node ids.

    Ids are assigned by descending occurrence count, ties broken by
    ascending lexicographic line order, so id 0 is always the most frequent
    line and a frequency-ranked prefix is just ids 0..N-1.
    """

    line_to_id: dict[str, int]
    id_to_line: list[str]
    freq: np.ndarray  # int64, indexed by id

    def __len__(self) -> int:
        return len(self.id_to_line)

    @classmethod
    def from_counts(cls, counts: Counter[str]) -> "Vocabulary":
        ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        id_to_line = [line for line, _ in ordered]
        line_to_id = {line: i for i, line in enumerate(id_to_line)}
        freq = np.array([c for _, c in ordered], dtype=np.int64)
        return cls(line_to_id=line_to_id, id_to_line=id_to_line, freq=freq)

    def save(self, path: Path) -> None:
        """Write the sidecar: one `id<TAB>freq<TAB>line` record per line."""
        with open(path, "w", encoding="utf-8") as fh:
            for i, line in enumerate(self.id_to_line):
                fh.write(f"{i}\t{int(self.freq[i])}\t{line}\n")

    @classmethod
    def load(cls, path: Path) -> "Vocabulary":
        id_to_line: list[str] = []
        freqs: list[int] = []
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, record in enumerate(fh):
                record = record.rstrip("\n")
                parts = record.split("\t", 2)
                if len(parts) != 3:
                    raise ParseError(f"{path}:{lineno + 1}: expected 3 tab-separated fields")
                ident, freq, text = parts
                if int(ident) != len(id_to_line):
                    raise ParseError(f"{path}:{lineno + 1}: ids must be contiguous")
                id_to_line.append(text)
                freqs.append(int(freq))
        line_to_id = {line: i for i, line in enumerate(id_to_line)}
        return cls(line_to_id=line_to_id, id_to_line=id_to_line,
                   freq=np.array(freqs, dtype=np.int64))


def build_vocabulary(sequences: Iterable[LineSequence]) -> Vocabulary:
    """Count every retained line occurrence across the corpus and assign ids."""
    counts: Counter[str] = Counter()
    for seq in sequences:
        for block in seq.blocks:
            counts.update(block)
    if not counts:
        raise InputError("empty corpus: no retained lines")
    return Vocabulary.from_counts(counts)


class EdgeAccumulator:
    """Undirected weighted edge counts, keyed canonically with u < v."""

    def __init__(self) -> None:
        self.weights: dict[tuple[int, int], int] = {}

    def add(self, u: int, v: int, w: int = 1) -> None:
        if u == v:
            return  # a line is never its own next-line suggestion
        key = (u, v) if u < v else (v, u)
        self.weights[key] = self.weights.get(key, 0) + w

    def __len__(self) -> int:
        return len(self.weights)

    def total_weight(self) -> int:
        return sum(self.weights.values())

    def sorted_edges(self) -> list[tuple[int, int, int]]:
        return [(u, v, w) for (u, v), w in sorted(self.weights.items())]


def accumulate_edges(
    sequences: Iterable[LineSequence], vocab: Vocabulary
) -> EdgeAccumulator:
    """Count one transition per adjacent in-block line pair; self-loops dropped."""
    acc = EdgeAccumulator()
    lookup = vocab.line_to_id
    for seq in sequences:
        for block in seq.blocks:
            for a, b in zip(block, block[1:]):
                try:
                    acc.add(lookup[a], lookup[b])
                except KeyError as exc:
                    raise InternalError(
                        f"line missing from vocabulary while accumulating edges: {exc}"
                    ) from exc
    return acc


@dataclass
class EdgeShard:
    """One on-disk .edg file plus its edge count."""

    path: Path
    edge_count: int


def write_edge_shards(
    acc: EdgeAccumulator,
    out_dir: Path,
    max_edges_per_shard: int = DEFAULT_MAX_EDGES_PER_SHARD,
    prefix: str = "edges",
) -> list[EdgeShard]:
    """Write edges sorted by (u, v) into consecutive shards of bounded size.

    Output is byte-deterministic for a given accumulator. Zero edges yield
    zero shards.
    """
    if max_edges_per_shard < 1:
        raise InputError("max_edges_per_shard must be >= 1")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    edges = acc.sorted_edges()
    shards: list[EdgeShard] = []
    for start in range(0, len(edges), max_edges_per_shard):
        chunk = edges[start:start + max_edges_per_shard]
        path = out_dir / f"{prefix}-{len(shards):05d}{SHARD_SUFFIX}"
        with open(path, "w", encoding="ascii") as fh:
            for u, v, w in chunk:
                fh.write(f"{u}\t{v}\t{w}\n")
        shards.append(EdgeShard(path=path, edge_count=len(chunk)))
    return shards


def iter_shard_edges(shard: EdgeShard | Path) -> Iterator[tuple[int, int, int]]:
    """Parse one shard, yielding (u, v, w) triples."""
    path = shard.path if isinstance(shard, EdgeShard) else Path(shard)
    with open(path, "r", encoding="ascii") as fh:
        for lineno, record in enumerate(fh):
            parts = record.rstrip("\n").split("\t")
            if len(parts) != 3:
                raise ParseError(
                    f"{path}:{lineno + 1}: expected 'u<TAB>v<TAB>w', got {record!r}"
                )
            try:
                u, v, w = int(parts[0]), int(parts[1]), int(parts[2])
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno + 1}: non-integer field") from exc
            yield u, v, w


def read_edges(shards: Iterable[EdgeShard | Path]) -> dict[tuple[int, int], int]:
    """Merge all shards back into a canonical edge map; duplicate edges sum."""
    merged: dict[tuple[int, int], int] = {}
    for shard in shards:
        for u, v, w in iter_shard_edges(shard):
            key = (u, v) if u < v else (v, u)
            merged[key] = merged.get(key, 0) + w
    return merged


def count_block_transitions(sequences: Iterable[LineSequence]) -> tuple[int, int]:
    """Independent streaming counter: (adjacent same-block pairs, self-loop pairs).

    Used by tests to cross-check the accumulator's total weight without
    going through EdgeAccumulator.
    """
    pairs = 0
    self_loops = 0
    for seq in sequences:
        for block in seq.blocks:
            for a, b in zip(block, block[1:]):
                pairs += 1
                if a == b:
                    self_loops += 1
    return pairs, self_loops
