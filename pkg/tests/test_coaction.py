"""Co-occurrence graph construction, neighbor sampling, graph attention."""

from __future__ import annotations

import numpy as np
import pytest
import torch

from oracles import oracle_coaction

from coactionrec.coaction import (CoActionParams, RelationAttention,
                                  aggregate_relation, build_coaction_graph,
                                  item_vector, load_graph, sample_neighbors,
                                  save_graph)
from coactionrec.datamodel import ActionRecord, BehaviorType


def rec(user, item, behavior=BehaviorType.CLICK, ts=0):
    return ActionRecord(user, item, behavior, ts)


class TestBuildGraph:
    def test_two_user_example(self):
        records = [rec("u1", "a"), rec("u1", "b"), rec("u2", "b"), rec("u2", "c")]
        graph = build_coaction_graph(records)
        assert graph.neighbors("click", "b") == {"a": 1, "c": 1}
        assert graph.neighbors("click", "a") == {"b": 1}
        assert graph.neighbors("purchase", "a") == {}

    def test_single_click_gives_empty_graph(self):
        graph = build_coaction_graph([rec("u1", "a")])
        assert graph.n_edges("click") == 0
        assert graph.n_edges("purchase") == 0

    def test_counts_distinct_users(self):
        records = [rec("u1", "a"), rec("u1", "b"), rec("u2", "a"), rec("u2", "b")]
        graph = build_coaction_graph(records)
        assert graph.neighbors("click", "a")["b"] == 2

    def test_repeat_actions_by_one_user_count_once(self):
        records = [rec("u1", "a", ts=0), rec("u1", "a", ts=1), rec("u1", "b")]
        graph = build_coaction_graph(records)
        assert graph.neighbors("click", "a")["b"] == 1

    def test_relations_are_independent(self):
        records = [rec("u1", "a"), rec("u1", "b"),
                   rec("u1", "a", BehaviorType.PURCHASE),
                   rec("u1", "c", BehaviorType.PURCHASE)]
        graph = build_coaction_graph(records)
        assert graph.neighbors("click", "a") == {"b": 1}
        assert graph.neighbors("purchase", "a") == {"c": 1}

    def test_no_self_loops_and_symmetric(self):
        rng = np.random.default_rng(0)
        records = [rec(f"u{rng.integers(6)}", f"i{rng.integers(8)}",
                       BehaviorType.CLICK if rng.random() < 0.7 else BehaviorType.PURCHASE,
                       int(t)) for t in range(60)]
        graph = build_coaction_graph(records)
        for relation in ("click", "purchase"):
            adj = graph.adjacency[relation]
            for a, nbrs in adj.items():
                assert a not in nbrs
                for b, count in nbrs.items():
                    assert adj[b][a] == count
                    assert count >= 1

    def test_matches_brute_force_enumeration_on_random_logs(self):
        rng = np.random.default_rng(42)
        for trial in range(20):
            n_users = int(rng.integers(1, 15))
            n_items = int(rng.integers(2, 15))
            n_rec = int(rng.integers(1, 80))
            records = [
                rec(f"u{rng.integers(n_users)}", f"i{rng.integers(n_items):02d}",
                    [BehaviorType.CLICK, BehaviorType.PURCHASE,
                     BehaviorType.WATCH][rng.integers(3)], int(t))
                for t in range(n_rec)
            ]
            expected = oracle_coaction(records)
            graph = build_coaction_graph(records)
            for relation in ("click", "purchase"):
                got = {}
                for a, nbrs in graph.adjacency[relation].items():
                    for b, count in nbrs.items():
                        if a < b:
                            got[(a, b)] = count
                assert got == expected[relation], f"trial {trial} {relation}"


class TestSampleNeighbors:
    def graph(self):
        records = (
            [rec(f"u{k}", "a") for k in range(5)] + [rec(f"u{k}", "b") for k in range(5)]
            + [rec("u0", "c"), rec("u1", "c")]
            + [rec("u0", "d"), rec("u1", "d")]
        )
        return build_coaction_graph(records)

    def test_orders_by_count_then_id(self):
        graph = self.graph()  # a: b count 5, c count 2, d count 2
        assert sample_neighbors(graph, "a", "click", 2) == ["b", "c"]
        assert sample_neighbors(graph, "a", "click", 3) == ["b", "c", "d"]

    def test_cold_item_gives_empty_list(self):
        assert sample_neighbors(self.graph(), "zz", "click", 5) == []

    def test_cap_exceeding_degree_returns_all(self):
        assert len(sample_neighbors(self.graph(), "a", "click", 10)) == 3


class TestGraphIO:
    def test_round_trip(self, tmp_path):
        records = [rec("u1", "a"), rec("u1", "b"), rec("u2", "b"), rec("u2", "c"),
                   rec("u1", "x", BehaviorType.PURCHASE),
                   rec("u1", "y", BehaviorType.PURCHASE)]
        graph = build_coaction_graph(records)
        path = tmp_path / "graph.tsv"
        save_graph(graph, str(path))
        assert load_graph(str(path)).adjacency == graph.adjacency

    def test_rows_are_relation_a_b_count_with_a_before_b(self, tmp_path):
        graph = build_coaction_graph([rec("u1", "b"), rec("u1", "a")])
        path = tmp_path / "graph.tsv"
        save_graph(graph, str(path))
        assert path.read_text() == "click\ta\tb\t1\n"

    @pytest.mark.parametrize("line,err", [
        ("click\tb\ta\t1", "ascending order"),
        ("click\ta\tb\tx", "bad count"),
        ("click\ta\tb\t0", "count must be >= 1"),
        ("hover\ta\tb\t1", "unknown relation"),
        ("click\ta\tb", "expected 4 fields"),
    ])
    def test_malformed_rows_rejected(self, tmp_path, line, err):
        path = tmp_path / "graph.tsv"
        path.write_text(line + "\n", encoding="utf-8")
        with pytest.raises(ValueError, match=err):
            load_graph(str(path))


@pytest.fixture
def attention():
    gen = torch.Generator().manual_seed(3)
    return RelationAttention(dim=5, generator=gen)


class TestAggregate:
    def test_single_neighbor_passes_through(self, attention):
        target = torch.randn(5, dtype=torch.float64)
        nbr = torch.randn(5, dtype=torch.float64)
        out = aggregate_relation(target, [nbr], attention)
        assert torch.allclose(out, nbr, atol=1e-12)

    def test_no_neighbors_give_zero_vector(self, attention):
        target = torch.randn(5, dtype=torch.float64)
        out = aggregate_relation(target, [], attention)
        assert torch.equal(out, torch.zeros(5, dtype=torch.float64))

    def test_equal_scores_average_the_neighbors(self, attention):
        # zeroed scoring vector makes every score 0 -> uniform weights
        with torch.no_grad():
            attention.attn.zero_()
        target = torch.randn(5, dtype=torch.float64)
        a = torch.randn(5, dtype=torch.float64)
        b = torch.randn(5, dtype=torch.float64)
        out = aggregate_relation(target, [a, b], attention)
        assert torch.allclose(out, (a + b) / 2.0, atol=1e-12)

    def test_permutation_invariant(self, attention):
        gen = torch.Generator().manual_seed(9)
        target = torch.randn(5, dtype=torch.float64, generator=gen)
        nbrs = [torch.randn(5, dtype=torch.float64, generator=gen) for _ in range(4)]
        a = aggregate_relation(target, nbrs, attention)
        b = aggregate_relation(target, list(reversed(nbrs)), attention)
        assert torch.allclose(a, b, atol=1e-12)

    def test_output_in_convex_hull_bound(self, attention):
        # weights are a distribution, so output norm <= max neighbor norm
        gen = torch.Generator().manual_seed(11)
        target = torch.randn(5, dtype=torch.float64, generator=gen)
        nbrs = [torch.randn(5, dtype=torch.float64, generator=gen) for _ in range(6)]
        out = aggregate_relation(target, nbrs, attention).detach()
        assert float(out.norm()) <= max(float(n.norm()) for n in nbrs) + 1e-12

    def test_padded_batched_rows_match_list_aggregation(self, attention):
        gen = torch.Generator().manual_seed(13)
        targets = torch.randn(3, 5, dtype=torch.float64, generator=gen)
        nbrs = torch.randn(3, 4, 5, dtype=torch.float64, generator=gen)
        mask = torch.tensor([[True, True, False, False],
                             [True, False, False, False],
                             [False, False, False, False]])
        batched = attention(targets, nbrs, mask)
        for r in range(3):
            valid = [nbrs[r, c] for c in range(4) if mask[r, c]]
            expect = aggregate_relation(targets[r], valid, attention)
            assert torch.allclose(batched[r], expect, atol=1e-12)


class TestItemVector:
    def make_params(self):
        gen = torch.Generator().manual_seed(5)
        return CoActionParams(dim=3, generator=gen)

    def test_identity_slice_selects_base(self):
        params = self.make_params()
        with torch.no_grad():
            params.combine_weight.zero_()
            params.combine_weight[:, :3] = torch.eye(3, dtype=torch.float64)
            params.combine_bias.zero_()
        e = torch.tensor([1.0, 2.0, 3.0], dtype=torch.float64)
        z = item_vector(e, torch.randn(3, dtype=torch.float64),
                        torch.randn(3, dtype=torch.float64), params)
        assert torch.allclose(z, e, atol=1e-12)

    def test_zero_inputs_give_bias(self):
        params = self.make_params()
        bias = torch.tensor([0.5, -1.0, 2.0], dtype=torch.float64)
        with torch.no_grad():
            params.combine_bias.copy_(bias)
        zero = torch.zeros(3, dtype=torch.float64)
        assert torch.allclose(item_vector(zero, zero, zero, params), bias,
                              atol=1e-12)

    def test_identity_blocks_sum_inputs(self):
        params = self.make_params()
        eye = torch.eye(3, dtype=torch.float64)
        with torch.no_grad():
            params.combine_weight.copy_(torch.cat([eye, eye, eye], dim=1))
            params.combine_bias.zero_()
        u = torch.tensor([1.0, 0.0, 0.0], dtype=torch.float64)
        v = torch.tensor([0.0, 2.0, 0.0], dtype=torch.float64)
        w = torch.tensor([0.0, 0.0, 4.0], dtype=torch.float64)
        assert torch.allclose(item_vector(u, v, w, params), u + v + w, atol=1e-12)
