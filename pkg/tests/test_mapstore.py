"""Map store: round trips, durability, inverse consistency, failure modes."""

from __future__ import annotations

import pytest

from nextline.errors import StoreError
from nextline.mapstore import MapStore, SortedTable


def build(tmp_path, pairs, block_size=4096):
    return MapStore.create(pairs, tmp_path / "line.kvs", tmp_path / "id.kvs",
                           block_size=block_size)


class TestRoundTrip:
    def test_basic(self, tmp_path):
        store = build(tmp_path, [("alpha = 1", 0), ("beta = 2", 1)])
        assert store.get_id("alpha = 1") == 0
        assert store.get_line(1) == "beta = 2"
        store.close()

    def test_unknown_keys_absent(self, tmp_path):
        store = build(tmp_path, [("a", 0)])
        assert store.get_id("zzz") is None
        assert store.get_line(42) is None
        store.close()

    def test_inverse_consistency_full_iteration(self, tmp_path):
        pairs = [(f"line_{i:04d} = value({i})", i) for i in range(500)]
        store = build(tmp_path, pairs, block_size=256)
        seen = dict(store.iter_lines())
        assert seen == dict(pairs)
        for line, ident in pairs:
            assert store.get_id(line) == ident
            assert store.get_line(ident) == line
        store.close()

    def test_reopen_durability(self, tmp_path):
        pairs = [(f"row {i}", i) for i in range(100)]
        store = build(tmp_path, pairs)
        before = [(store.get_id(f"row {i}"), store.get_line(i)) for i in range(100)]
        store.close()
        reopened = MapStore.open(tmp_path / "line.kvs", tmp_path / "id.kvs")
        after = [(reopened.get_id(f"row {i}"), reopened.get_line(i))
                 for i in range(100)]
        assert before == after
        reopened.close()

    def test_unicode_lines(self, tmp_path):
        store = build(tmp_path, [("x = 'héllo — ツ'", 0)])
        assert store.get_id("x = 'héllo — ツ'") == 0
        assert store.get_line(0) == "x = 'héllo — ツ'"
        store.close()

    def test_count_and_bytes(self, tmp_path):
        pairs = [("ab", 0), ("cd", 1)]
        store = build(tmp_path, pairs)
        assert store.count == 2
        # each direction serializes both the 2-byte line and the 8-byte id
        assert store.serialized_kv_bytes == 2 * (2 + 8) * 2
        store.close()

    def test_context_manager(self, tmp_path):
        with build(tmp_path, [("a", 0)]) as store:
            assert store.get_id("a") == 0


class TestBuildErrors:
    def test_duplicate_line_key(self, tmp_path):
        with pytest.raises(StoreError):
            build(tmp_path, [("same", 0), ("same", 1)])

    def test_duplicate_id_key(self, tmp_path):
        with pytest.raises(StoreError):
            build(tmp_path, [("a", 7), ("b", 7)])


class TestCorruption:
    def test_bad_magic(self, tmp_path):
        path = tmp_path / "x.kvs"
        path.write_bytes(b"JUNKJUNKJUNKJUNKJUNKJUNK")
        with pytest.raises(StoreError):
            SortedTable.open(path)

    def test_truncated_footer(self, tmp_path):
        store = build(tmp_path, [("a", 0)])
        store.close()
        path = tmp_path / "line.kvs"
        path.write_bytes(path.read_bytes()[:10])
        with pytest.raises(StoreError):
            SortedTable.open(path)

    def test_mismatched_halves(self, tmp_path):
        build(tmp_path, [("a", 0), ("b", 1)]).close()
        other = tmp_path / "other"
        other.mkdir()
        build(other, [("c", 0)]).close()
        with pytest.raises(StoreError):
            MapStore.open(tmp_path / "line.kvs", other / "id.kvs")

    def test_missing_file(self, tmp_path):
        with pytest.raises(StoreError):
            SortedTable.open(tmp_path / "absent.kvs")


class TestBlockSpanning:
    def test_many_entries_small_blocks(self, tmp_path):
        # force hundreds of blocks so lookups cross block boundaries
        pairs = [(f"{i:06d} " + "x" * (i % 37), i) for i in range(2_000)]
        store = build(tmp_path, pairs, block_size=128)
        for i in range(0, 2_000, 97):
            assert store.get_line(i) == pairs[i][0]
            assert store.get_id(pairs[i][0]) == i
        store.close()

    def test_empty_store(self, tmp_path):
        store = build(tmp_path, [])
        assert store.count == 0
        assert store.get_id("anything") is None
        store.close()
