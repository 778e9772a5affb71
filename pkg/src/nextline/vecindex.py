"""Half-precision flat vector index with exact top-k squared-L2 search.

Vectors are stored row-major as IEEE 754 binary16, halving the payload
relative to single precision. Queries widen rows back to float32 and
accumulate squared differences sequentially in float32, so results are
bit-reproducible and comparable against a straightforward per-row scan.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit

from .errors import FormatError, InputError

_MAGIC = b"NLVI"
_VERSION = 1
_HEADER = struct.Struct("<III Q")  # version, dim, reserved, count

FLOAT16_MAX = 65504.0


@dataclass
class QueryResult:
    id: int
    distance: float  # squared L2, single precision


@dataclass
class VectorIndex:
    """Immutable after build/load; concurrent searches need no coordination."""

    vectors: np.ndarray  # float16 (count, dim), row i <-> vocabulary id i

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def count(self) -> int:
        return self.vectors.shape[0]

    @property
    def payload_bytes(self) -> int:
        return 2 * self.dim * self.count

    def row(self, i: int) -> np.ndarray:
        """Row i widened to float32 (the form queries are made in)."""
        if not 0 <= i < self.count:
            raise InputError(f"row {i} out of range [0, {self.count})")
        return self.vectors[i].astype(np.float32)


def build_index(table: np.ndarray) -> VectorIndex:
    """Round a float table to nearest binary16 (ties to even) and wrap it.

    Components whose magnitude exceeds the binary16 range are a hard error:
    an index with infinities would silently break every distance involving
    that row.
    """
    table = np.asarray(table)
    if table.ndim != 2 or table.shape[0] == 0:
        raise InputError("embedding table must be a non-empty 2-D array")
    if not np.all(np.isfinite(table)):
        raise InputError("embedding table contains non-finite values")
    with np.errstate(over="ignore"):  # overflow is detected and raised below
        halves = table.astype(np.float16)
    overflow = np.isinf(halves)
    if overflow.any():
        row = int(np.argwhere(overflow)[0][0])
        raise InputError(
            f"component magnitude exceeds binary16 range (> {FLOAT16_MAX}) at row {row}"
        )
    return VectorIndex(vectors=halves)


@njit(cache=True)
def _squared_distances(rows32, query, out):
    # Strict (non-fastmath) sequential float32 accumulation: bit-identical to
    # a per-row running-sum scan, which is what the test oracle computes.
    n, dim = rows32.shape
    for i in range(n):
        acc = np.float32(0.0)
        for k in range(dim):
            diff = rows32[i, k] - query[k]
            acc += diff * diff
        out[i] = acc


def squared_distances(index: VectorIndex, query: np.ndarray) -> np.ndarray:
    """Squared L2 distance from query to every row, in float32."""
    query = np.ascontiguousarray(query, dtype=np.float32)
    if query.ndim != 1 or query.shape[0] != index.dim:
        raise InputError(
            f"query dimension {query.shape} does not match index dim {index.dim}"
        )
    rows32 = index.vectors.astype(np.float32)
    out = np.empty(index.count, dtype=np.float32)
    _squared_distances(rows32, query, out)
    return out


def search(index: VectorIndex, query: np.ndarray, k: int) -> list[QueryResult]:
    """Exact top-k by ascending squared distance, ties broken by ascending id."""
    if k < 1:
        raise InputError("k must be >= 1")
    distances = squared_distances(index, query)
    # stable sort on distance == tie-break by row id
    order = np.argsort(distances, kind="stable")[: min(k, index.count)]
    return [QueryResult(id=int(i), distance=float(distances[i])) for i in order]


def save_index(index: VectorIndex, path: Path) -> None:
    payload = np.ascontiguousarray(index.vectors, dtype="<f2").tobytes()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(_HEADER.pack(_VERSION, index.dim, 0, index.count))
        fh.write(payload)


def load_index(path: Path) -> VectorIndex:
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise FormatError(f"{path}: bad index magic {magic!r}")
        header = fh.read(_HEADER.size)
        if len(header) != _HEADER.size:
            raise FormatError(f"{path}: truncated index header")
        version, dim, _reserved, count = _HEADER.unpack(header)
        if version != _VERSION:
            raise FormatError(
                f"{path}: index version {version}, this build reads {_VERSION}"
            )
        payload = fh.read()
    expected = 2 * dim * count
    if len(payload) != expected:
        raise FormatError(
            f"{path}: payload is {len(payload)} bytes, expected {expected}"
        )
    vectors = np.frombuffer(payload, dtype="<f2").reshape(count, dim).copy()
    return VectorIndex(vectors=vectors)
