"""Second-order biased random walks over the undirected line-transition graph.

The next step from node v, having arrived from t, weights each neighbor x by
alpha * w(v, x) with alpha = 1/p when x returns to t, alpha = 1 when x is
also adjacent to t, and alpha = 1/q otherwise. The first step of a walk has
no previous node and is plain weight-proportional. Small q (< 1) therefore
pushes walks outward, DFS-like; large q keeps them local, BFS-like.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np
from numba import njit, prange

from ._rng import draw_unit, stream_base
from .errors import ConfigError, InputError, ParseError
from .graph import EdgeShard, read_edges


@dataclass(frozen=True)
class WalkConfig:
    p: float = 1.0          # return parameter
    q: float = 0.5          # in-out parameter
    num_walks: int = 10     # walks started per node
    walk_length: int = 10   # nodes per walk
    seed: int = 1

    def __post_init__(self) -> None:
        if self.p <= 0 or self.q <= 0:
            raise ConfigError("p and q must be positive")
        if self.num_walks < 1 or self.walk_length < 1:
            raise ConfigError("num_walks and walk_length must be >= 1")


@dataclass
class AdjacencyView:
    """CSR adjacency, symmetric by construction, neighbor lists sorted by id."""

    num_nodes: int
    indptr: np.ndarray     # int64, len num_nodes + 1
    neighbors: np.ndarray  # int32
    weights: np.ndarray    # float64

    def degree(self, v: int) -> int:
        return int(self.indptr[v + 1] - self.indptr[v])

    def neighbors_of(self, v: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.indptr[v], self.indptr[v + 1]
        return self.neighbors[lo:hi], self.weights[lo:hi]

    def has_edge(self, u: int, v: int) -> bool:
        ids, _ = self.neighbors_of(u)
        pos = np.searchsorted(ids, v)
        return pos < len(ids) and ids[pos] == v

    @classmethod
    def from_edge_map(
        cls, edges: dict[tuple[int, int], int], num_nodes: int | None = None
    ) -> "AdjacencyView":
        if num_nodes is None:
            num_nodes = 1 + max((max(u, v) for u, v in edges), default=-1)
        deg = np.zeros(num_nodes, dtype=np.int64)
        for (u, v), _ in edges.items():
            deg[u] += 1
            deg[v] += 1
        indptr = np.zeros(num_nodes + 1, dtype=np.int64)
        np.cumsum(deg, out=indptr[1:])
        neighbors = np.empty(indptr[-1], dtype=np.int32)
        weights = np.empty(indptr[-1], dtype=np.float64)
        cursor = indptr[:-1].copy()
        for (u, v), w in sorted(edges.items()):
            neighbors[cursor[u]] = v
            weights[cursor[u]] = w
            cursor[u] += 1
            neighbors[cursor[v]] = u
            weights[cursor[v]] = w
            cursor[v] += 1
        # per-node sort by neighbor id (u-side inserts are already ordered,
        # v-side ones are not)
        for n in range(num_nodes):
            lo, hi = indptr[n], indptr[n + 1]
            order = np.argsort(neighbors[lo:hi], kind="stable")
            neighbors[lo:hi] = neighbors[lo:hi][order]
            weights[lo:hi] = weights[lo:hi][order]
        return cls(num_nodes=num_nodes, indptr=indptr,
                   neighbors=neighbors, weights=weights)


def load_adjacency(
    shards: Iterable[EdgeShard | Path], num_nodes: int | None = None
) -> AdjacencyView:
    """Merge shards into a symmetric adjacency; duplicate edges sum weights."""
    edges = read_edges(shards)
    for (u, v), w in edges.items():
        if u < 0 or v < 0:
            raise ParseError(f"negative node id in edge ({u}, {v})")
        if w < 1:
            raise ParseError(f"edge ({u}, {v}) has non-positive weight {w}")
    return AdjacencyView.from_edge_map(edges, num_nodes=num_nodes)


def transition_distribution(
    prev: int | None, cur: int, adj: AdjacencyView, cfg: WalkConfig
) -> list[tuple[int, float]]:
    """Exact next-step distribution at cur given the previous node.

    Pure-numpy reference used both by the service-side math and as the
    analytic side of the Monte Carlo checks against generated walks.
    """
    ids, weights = adj.neighbors_of(cur)
    if len(ids) == 0:
        raise InputError(f"node {cur} has no neighbors; no transition exists")
    if prev is None:
        scores = weights.astype(np.float64)
    else:
        prev_ids, _ = adj.neighbors_of(prev)
        scores = np.empty(len(ids), dtype=np.float64)
        for i, x in enumerate(ids):
            if x == prev:
                alpha = 1.0 / cfg.p
            else:
                pos = np.searchsorted(prev_ids, x)
                if pos < len(prev_ids) and prev_ids[pos] == x:
                    alpha = 1.0
                else:
                    alpha = 1.0 / cfg.q
            scores[i] = alpha * weights[i]
    probs = scores / scores.sum()
    return [(int(x), float(pr)) for x, pr in zip(ids, probs)]


@dataclass
class Walks:
    """Walk corpus as a padded array; row order is (start node, walk index)."""

    array: np.ndarray    # int32 (rows, walk_length)
    lengths: np.ndarray  # int32 (rows,)
    num_walks: int

    def __len__(self) -> int:
        return self.array.shape[0]

    def total_tokens(self) -> int:
        return int(self.lengths.sum())

    def __iter__(self) -> Iterator[list[int]]:
        for row in range(self.array.shape[0]):
            yield [int(x) for x in self.array[row, : self.lengths[row]]]

    def dump(self, path: Path) -> None:
        """One walk per line, node ids space-separated."""
        with open(path, "w", encoding="ascii") as fh:
            for walk in self:
                fh.write(" ".join(str(n) for n in walk) + "\n")

    @classmethod
    def load(cls, path: Path, num_walks: int = 1) -> "Walks":
        rows: list[list[int]] = []
        with open(path, "r", encoding="ascii") as fh:
            for lineno, record in enumerate(fh):
                try:
                    rows.append([int(tok) for tok in record.split()])
                except ValueError as exc:
                    raise ParseError(f"{path}:{lineno + 1}: non-integer node id") from exc
        if not rows:
            return cls(array=np.zeros((0, 1), dtype=np.int32),
                       lengths=np.zeros(0, dtype=np.int32), num_walks=num_walks)
        width = max(len(r) for r in rows)
        array = np.zeros((len(rows), width), dtype=np.int32)
        lengths = np.zeros(len(rows), dtype=np.int32)
        for i, r in enumerate(rows):
            array[i, : len(r)] = r
            lengths[i] = len(r)
        return cls(array=array, lengths=lengths, num_walks=num_walks)


@njit(cache=True)
def _has_neighbor(neighbors, lo, hi, x):
    """Binary search for x in the sorted slice neighbors[lo:hi]."""
    while lo < hi:
        mid = (lo + hi) // 2
        val = neighbors[mid]
        if val == x:
            return True
        if val < x:
            lo = mid + 1
        else:
            hi = mid
    return False


@njit(cache=True, parallel=True)
def _walk_kernel(indptr, neighbors, weights, inv_p, inv_q,
                 num_walks, walk_length, seed, out, lengths):
    num_nodes = indptr.shape[0] - 1
    for row in prange(num_nodes * num_walks):
        node = row // num_walks
        wi = row - node * num_walks
        base = stream_base(seed, np.uint64(node), np.uint64(wi))
        draws = np.uint64(0)
        out[row, 0] = node
        if indptr[node + 1] == indptr[node]:
            lengths[row] = 1
            continue
        lengths[row] = walk_length
        prev = -1
        cur = node
        for step in range(1, walk_length):
            lo = indptr[cur]
            hi = indptr[cur + 1]
            plo = np.int64(0)
            phi = np.int64(0)
            if prev >= 0:
                plo = indptr[prev]
                phi = indptr[prev + 1]
            # pass 1: total unnormalized score
            total = 0.0
            for idx in range(lo, hi):
                x = neighbors[idx]
                if prev < 0:
                    alpha = 1.0
                elif x == prev:
                    alpha = inv_p
                elif _has_neighbor(neighbors, plo, phi, x):
                    alpha = 1.0
                else:
                    alpha = inv_q
                total += alpha * weights[idx]
            r = draw_unit(base, draws) * total
            draws += np.uint64(1)
            # pass 2: select by cumulative score
            chosen = neighbors[hi - 1]
            acc = 0.0
            for idx in range(lo, hi):
                x = neighbors[idx]
                if prev < 0:
                    alpha = 1.0
                elif x == prev:
                    alpha = inv_p
                elif _has_neighbor(neighbors, plo, phi, x):
                    alpha = 1.0
                else:
                    alpha = inv_q
                acc += alpha * weights[idx]
                if r < acc:
                    chosen = x
                    break
            out[row, step] = chosen
            prev = cur
            cur = chosen
    return out


def generate_walks(adj: AdjacencyView, cfg: WalkConfig) -> Walks:
    """Emit num_walks walks per node, deterministically for a given seed.

    Nodes with at least one neighbor always produce full-length walks (the
    undirected graph lets a walk bounce back and forth); isolated nodes
    produce single-node walks. Per-walk randomness is derived from
    (seed, start node, walk index), so the result is independent of thread
    scheduling.
    """
    rows = adj.num_nodes * cfg.num_walks
    out = np.zeros((rows, cfg.walk_length), dtype=np.int32)
    lengths = np.zeros(rows, dtype=np.int32)
    if rows:
        _walk_kernel(
            adj.indptr, adj.neighbors, adj.weights,
            1.0 / cfg.p, 1.0 / cfg.q,
            cfg.num_walks, cfg.walk_length, np.uint64(cfg.seed & (2**64 - 1)),
            out, lengths,
        )
    return Walks(array=out, lengths=lengths, num_walks=cfg.num_walks)
