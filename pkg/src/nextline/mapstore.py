"""Disk-backed line<->id mappings with point lookups that avoid full loads.

Each direction is a write-once sorted table: fixed-size data blocks of
(key, value) records plus a sparse index holding one entry per block. Opening
a store reads only the sparse index; a lookup binary-searches it in memory
and then reads a single block with pread, so resident memory stays a small
fraction of the serialized data and concurrent readers need no locking.
"""

from __future__ import annotations

import os
import struct
from bisect import bisect_right
from pathlib import Path
from typing import Iterable, Iterator

from .errors import StoreError

_MAGIC = b"NLKV"
_VERSION = 1
_HEADER = struct.Struct("<4sIIQQ")   # magic, version, block_size, count, kv_bytes
_FOOTER = struct.Struct("<QI4s")     # index_offset, index_entries, magic
_RECORD = struct.Struct("<HI")       # key_len, value_len
_INDEX_ENTRY = struct.Struct("<QIH") # block_offset, block_length, key_len

DEFAULT_BLOCK_SIZE = 4096


class SortedTable:
    """One direction of the mapping: sorted, immutable, block-indexed."""

    def __init__(self, path: Path, block_size: int, count: int, kv_bytes: int,
                 index_keys: list[bytes], index_offsets: list[int],
                 index_lengths: list[int], fd: int):
        self.path = path
        self.block_size = block_size
        self.count = count
        self.kv_bytes = kv_bytes
        self._index_keys = index_keys
        self._index_offsets = index_offsets
        self._index_lengths = index_lengths
        self._fd = fd

    # -- build ---------------------------------------------------------

    @staticmethod
    def build(pairs: Iterable[tuple[bytes, bytes]], path: Path,
              block_size: int = DEFAULT_BLOCK_SIZE) -> None:
        """Sort pairs by key and write the table; duplicate keys are an error."""
        items = sorted(pairs)
        for (a, _), (b, _) in zip(items, items[1:]):
            if a == b:
                raise StoreError(f"duplicate key while building {path}: {a!r}")
        kv_bytes = sum(len(k) + len(v) for k, v in items)
        index: list[tuple[bytes, int, int]] = []   # first_key, offset, length
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(_MAGIC, _VERSION, block_size, len(items), kv_bytes))
            block = bytearray()
            block_first: bytes | None = None

            def flush() -> None:
                nonlocal block, block_first
                if block_first is None:
                    return
                offset = fh.tell()
                fh.write(block)
                index.append((block_first, offset, len(block)))
                block = bytearray()
                block_first = None

            for key, value in items:
                if len(key) > 0xFFFF:
                    raise StoreError(f"key longer than 65535 bytes in {path}")
                if block_first is None:
                    block_first = key
                block += _RECORD.pack(len(key), len(value))
                block += key
                block += value
                if len(block) >= block_size:
                    flush()
            flush()
            index_offset = fh.tell()
            for first_key, offset, length in index:
                fh.write(_INDEX_ENTRY.pack(offset, length, len(first_key)))
                fh.write(first_key)
            fh.write(_FOOTER.pack(index_offset, len(index), _MAGIC))

    # -- open / read ---------------------------------------------------

    @classmethod
    def open(cls, path: Path) -> "SortedTable":
        path = Path(path)
        try:
            fd = os.open(path, os.O_RDONLY)
        except OSError as exc:
            raise StoreError(f"cannot open store {path}: {exc}") from exc
        try:
            header = os.pread(fd, _HEADER.size, 0)
            if len(header) != _HEADER.size:
                raise StoreError(f"{path}: truncated store header")
            magic, version, block_size, count, kv_bytes = _HEADER.unpack(header)
            if magic != _MAGIC:
                raise StoreError(f"{path}: bad store magic {magic!r}")
            if version != _VERSION:
                raise StoreError(f"{path}: store version {version}, expected {_VERSION}")
            size = os.fstat(fd).st_size
            footer = os.pread(fd, _FOOTER.size, size - _FOOTER.size)
            if len(footer) != _FOOTER.size:
                raise StoreError(f"{path}: truncated store footer")
            index_offset, index_entries, foot_magic = _FOOTER.unpack(footer)
            if foot_magic != _MAGIC:
                raise StoreError(f"{path}: bad store footer magic")
            raw_index = os.pread(fd, size - _FOOTER.size - index_offset, index_offset)
            keys: list[bytes] = []
            offsets: list[int] = []
            lengths: list[int] = []
            pos = 0
            for _ in range(index_entries):
                offset, length, klen = _INDEX_ENTRY.unpack_from(raw_index, pos)
                pos += _INDEX_ENTRY.size
                keys.append(raw_index[pos:pos + klen])
                pos += klen
                offsets.append(offset)
                lengths.append(length)
        except Exception:
            os.close(fd)
            raise
        return cls(path=path, block_size=block_size, count=count,
                   kv_bytes=kv_bytes, index_keys=keys, index_offsets=offsets,
                   index_lengths=lengths, fd=fd)

    def get(self, key: bytes) -> bytes | None:
        if not self._index_keys:
            return None
        slot = bisect_right(self._index_keys, key) - 1
        if slot < 0:
            return None
        block = os.pread(self._fd, self._index_lengths[slot],
                         self._index_offsets[slot])
        pos = 0
        while pos < len(block):
            klen, vlen = _RECORD.unpack_from(block, pos)
            pos += _RECORD.size
            rec_key = block[pos:pos + klen]
            pos += klen
            if rec_key == key:
                return block[pos:pos + vlen]
            pos += vlen
        return None

    def items(self) -> Iterator[tuple[bytes, bytes]]:
        """Full scan in key order (test/diagnostic use; streams block by block)."""
        for slot in range(len(self._index_keys)):
            block = os.pread(self._fd, self._index_lengths[slot],
                             self._index_offsets[slot])
            pos = 0
            while pos < len(block):
                klen, vlen = _RECORD.unpack_from(block, pos)
                pos += _RECORD.size
                key = block[pos:pos + klen]
                pos += klen
                value = block[pos:pos + vlen]
                pos += vlen
                yield key, value

    def close(self) -> None:
        if self._fd >= 0:
            os.close(self._fd)
            self._fd = -1


_ID = struct.Struct(">Q")  # big-endian so byte order == numeric order


def _encode_id(i: int) -> bytes:
    return _ID.pack(i)


def _decode_id(b: bytes) -> int:
    return _ID.unpack(b)[0]


class MapStore:
    """The line->id and id->line tables as one logical store."""

    def __init__(self, line_table: SortedTable, id_table: SortedTable):
        self.line_table = line_table
        self.id_table = id_table

    @staticmethod
    def create(pairs: Iterable[tuple[str, int]], line_path: Path,
               id_path: Path, block_size: int = DEFAULT_BLOCK_SIZE) -> "MapStore":
        """Persist both directions of a (line, id) bijection and open them."""
        materialized = list(pairs)
        SortedTable.build(
            ((line.encode("utf-8"), _encode_id(i)) for line, i in materialized),
            line_path, block_size=block_size)
        SortedTable.build(
            ((_encode_id(i), line.encode("utf-8")) for line, i in materialized),
            id_path, block_size=block_size)
        return MapStore.open(line_path, id_path)

    @staticmethod
    def open(line_path: Path, id_path: Path) -> "MapStore":
        line_table = SortedTable.open(line_path)
        try:
            id_table = SortedTable.open(id_path)
        except Exception:
            line_table.close()
            raise
        if line_table.count != id_table.count:
            line_table.close()
            id_table.close()
            raise StoreError(
                f"store halves disagree: {line_table.count} lines vs "
                f"{id_table.count} ids"
            )
        return MapStore(line_table, id_table)

    @property
    def count(self) -> int:
        return self.line_table.count

    @property
    def serialized_kv_bytes(self) -> int:
        return self.line_table.kv_bytes + self.id_table.kv_bytes

    def get_id(self, line: str) -> int | None:
        value = self.line_table.get(line.encode("utf-8"))
        return None if value is None else _decode_id(value)

    def get_line(self, i: int) -> str | None:
        value = self.id_table.get(_encode_id(i))
        return None if value is None else value.decode("utf-8")

    def iter_lines(self) -> Iterator[tuple[str, int]]:
        for key, value in self.line_table.items():
            yield key.decode("utf-8"), _decode_id(value)

    def close(self) -> None:
        self.line_table.close()
        self.id_table.close()

    def __enter__(self) -> "MapStore":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
