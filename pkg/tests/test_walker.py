"""Biased walk generation: bias kernel, determinism, and Monte Carlo checks."""

from __future__ import annotations

import numpy as np
import pytest

from nextline.errors import ConfigError, InputError, ParseError
from nextline.graph import EdgeAccumulator, write_edge_shards
from nextline.walker import (
    AdjacencyView,
    WalkConfig,
    Walks,
    generate_walks,
    load_adjacency,
    transition_distribution,
)

PATH_GRAPH = {(0, 1): 1, (1, 2): 1}  # A - B - C


def make_adj(edges, n=None):
    return AdjacencyView.from_edge_map(edges, num_nodes=n)


class TestAdjacency:
    def test_symmetry(self, tmp_path):
        acc = EdgeAccumulator()
        acc.add(0, 1, 2)
        shards = write_edge_shards(acc, tmp_path)
        adj = load_adjacency(shards)
        ids0, w0 = adj.neighbors_of(0)
        ids1, w1 = adj.neighbors_of(1)
        assert list(ids0) == [1] and list(w0) == [2.0]
        assert list(ids1) == [0] and list(w1) == [2.0]

    def test_duplicate_edges_across_shards_sum(self, tmp_path):
        (tmp_path / "s0.edg").write_text("0\t1\t2\n")
        (tmp_path / "s1.edg").write_text("0\t1\t3\n")
        adj = load_adjacency([tmp_path / "s0.edg", tmp_path / "s1.edg"])
        _, w = adj.neighbors_of(0)
        assert list(w) == [5.0]

    def test_malformed_line(self, tmp_path):
        (tmp_path / "s.edg").write_text("0 1\n")
        with pytest.raises(ParseError):
            load_adjacency([tmp_path / "s.edg"])

    def test_isolated_nodes_empty(self):
        adj = make_adj(PATH_GRAPH, n=5)
        assert adj.degree(4) == 0

    def test_neighbor_lists_sorted(self):
        adj = make_adj({(2, 9): 1, (2, 3): 1, (0, 2): 1})
        ids, _ = adj.neighbors_of(2)
        assert list(ids) == sorted(ids)


class TestTransitionDistribution:
    def test_path_bias(self):
        adj = make_adj(PATH_GRAPH)
        cfg = WalkConfig(p=1.0, q=0.5)
        dist = dict(transition_distribution(0, 1, adj, cfg))
        assert dist[0] == pytest.approx(1 / 3)
        assert dist[2] == pytest.approx(2 / 3)

    def test_first_order_when_p_q_one(self):
        adj = make_adj({(0, 1): 3, (1, 2): 1})
        cfg = WalkConfig(p=1.0, q=1.0)
        dist = dict(transition_distribution(0, 1, adj, cfg))
        assert dist[0] == pytest.approx(0.75)
        assert dist[2] == pytest.approx(0.25)

    def test_triangle_common_neighbor(self):
        adj = make_adj({(0, 1): 1, (1, 2): 1, (0, 2): 1})
        cfg = WalkConfig(p=1.0, q=0.5)
        dist = dict(transition_distribution(0, 1, adj, cfg))
        assert dist[0] == pytest.approx(0.5)
        assert dist[2] == pytest.approx(0.5)

    def test_first_step_weight_proportional(self):
        adj = make_adj({(0, 1): 3, (0, 2): 1})
        dist = dict(transition_distribution(None, 0, adj, WalkConfig(q=0.25)))
        assert dist[1] == pytest.approx(0.75)
        assert dist[2] == pytest.approx(0.25)

    def test_isolated_node_error(self):
        adj = make_adj(PATH_GRAPH, n=4)
        with pytest.raises(InputError):
            transition_distribution(None, 3, adj, WalkConfig())

    def test_probabilities_sum_to_one(self):
        adj = make_adj({(0, 1): 2, (1, 2): 7, (1, 3): 1, (2, 3): 4})
        dist = transition_distribution(2, 1, adj, WalkConfig(p=4.0, q=0.3))
        assert sum(p for _, p in dist) == pytest.approx(1.0)


class TestGenerateWalks:
    def test_two_node_alternation(self):
        adj = make_adj({(0, 1): 1})
        walks = generate_walks(adj, WalkConfig(num_walks=1, walk_length=10, seed=3))
        assert list(walks)[0] == [0, 1, 0, 1, 0, 1, 0, 1, 0, 1]

    def test_isolated_single_node_walk(self):
        adj = make_adj(PATH_GRAPH, n=4)
        walks = generate_walks(adj, WalkConfig(num_walks=2, walk_length=6, seed=1))
        per_start = list(walks)
        assert per_start[-1] == [3]
        assert per_start[-2] == [3]

    def test_walk_count_exact(self):
        adj = make_adj(PATH_GRAPH, n=5)
        cfg = WalkConfig(num_walks=7, walk_length=4, seed=9)
        walks = generate_walks(adj, cfg)
        assert len(walks) == 7 * 5

    def test_full_length_when_connected(self):
        adj = make_adj(PATH_GRAPH)
        walks = generate_walks(adj, WalkConfig(num_walks=4, walk_length=9, seed=2))
        assert (walks.lengths == 9).all()

    def test_adjacency_invariant(self):
        adj = make_adj({(0, 1): 1, (1, 2): 2, (2, 3): 1, (1, 3): 1})
        walks = generate_walks(adj, WalkConfig(num_walks=5, walk_length=8, seed=4))
        for walk in walks:
            for a, b in zip(walk, walk[1:]):
                assert adj.has_edge(a, b)

    def test_first_node_is_start(self):
        adj = make_adj(PATH_GRAPH, n=4)
        cfg = WalkConfig(num_walks=3, walk_length=5, seed=8)
        walks = generate_walks(adj, cfg)
        for row in range(len(walks)):
            assert walks.array[row, 0] == row // cfg.num_walks

    def test_deterministic_given_seed(self):
        adj = make_adj({(0, 1): 1, (1, 2): 2, (0, 2): 1})
        cfg = WalkConfig(num_walks=10, walk_length=10, seed=77)
        a = generate_walks(adj, cfg)
        b = generate_walks(adj, cfg)
        assert np.array_equal(a.array, b.array)
        assert np.array_equal(a.lengths, b.lengths)

    def test_seed_changes_walks(self):
        adj = make_adj({(0, 1): 1, (1, 2): 2, (0, 2): 1})
        a = generate_walks(adj, WalkConfig(num_walks=10, walk_length=10, seed=1))
        b = generate_walks(adj, WalkConfig(num_walks=10, walk_length=10, seed=2))
        assert not np.array_equal(a.array, b.array)

    def test_dump_roundtrip(self, tmp_path):
        adj = make_adj(PATH_GRAPH, n=4)
        walks = generate_walks(adj, WalkConfig(num_walks=2, walk_length=5, seed=5))
        path = tmp_path / "walks.txt"
        walks.dump(path)
        first_bytes = path.read_bytes()
        walks.dump(path)
        assert path.read_bytes() == first_bytes
        loaded = Walks.load(path, num_walks=2)
        assert [list(w) for w in loaded] == [list(w) for w in walks]

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            WalkConfig(p=0.0)
        with pytest.raises(ConfigError):
            WalkConfig(q=-1.0)
        with pytest.raises(ConfigError):
            WalkConfig(num_walks=0)
        with pytest.raises(ConfigError):
            WalkConfig(walk_length=0)


class TestMonteCarlo:
    def test_second_step_frequencies_match_distribution(self):
        # square with one diagonal, mixed weights
        edges = {(0, 1): 2, (1, 2): 1, (2, 3): 3, (0, 3): 1, (1, 3): 2}
        adj = make_adj(edges)
        cfg = WalkConfig(p=2.0, q=0.5, num_walks=40_000, walk_length=3, seed=17)
        walks = generate_walks(adj, cfg)
        arr = walks.array
        # tally empirical P(step2 | step0, step1) for walks starting at node 0
        starts = arr[arr[:, 0] == 0]
        for mid in np.unique(starts[:, 1]):
            chosen = starts[starts[:, 1] == mid]
            if len(chosen) < 5000:
                continue
            expected = dict(transition_distribution(0, int(mid), adj, cfg))
            for nxt, prob in expected.items():
                emp = float((chosen[:, 2] == nxt).mean())
                assert abs(emp - prob) < 0.02, (mid, nxt, emp, prob)
