"""Item co-action graphs and attention over graph neighborhoods.

Two relations are tracked: items clicked by the same user (co-click) and items
purchased by the same user (co-purchase). Edge weight = number of distinct
users who performed both actions. The item tower attends over a capped
neighbor set per relation and combines the target embedding with both
aggregates through one affine map.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

import torch
from torch import nn

from .datamodel import ActionRecord, BehaviorType
from .embedding import _uniform

__all__ = ["CoActionGraph", "build_coaction_graph", "sample_neighbors",
           "save_graph", "load_graph", "RelationAttention", "CoActionParams",
           "aggregate_relation", "item_vector"]

RELATIONS = ("click", "purchase")
LEAKY_SLOPE = 0.2


@dataclass
class CoActionGraph:
    """Symmetric weighted item-item graphs, one adjacency dict per relation."""

    adjacency: dict[str, dict[str, dict[str, int]]] = field(
        default_factory=lambda: {rel: {} for rel in RELATIONS})

    def neighbors(self, relation: str, item_id: str) -> dict[str, int]:
        return self.adjacency[relation].get(item_id, {})

    def n_edges(self, relation: str) -> int:
        return sum(len(nbrs) for nbrs in self.adjacency[relation].values()) // 2


_RELATION_BEHAVIOR = {
    "click": BehaviorType.CLICK,
    "purchase": BehaviorType.PURCHASE,
}


def build_coaction_graph(records: list[ActionRecord]) -> CoActionGraph:
    """Count distinct users per unordered item pair, per relation.

    Self-loops never appear (pairs are over the per-user distinct item set).
    """
    graph = CoActionGraph()
    for relation, behavior in _RELATION_BEHAVIOR.items():
        per_user: dict[str, set[str]] = defaultdict(set)
        for r in records:
            if r.behavior == behavior:
                per_user[r.user_id].add(r.item_id)
        adj = graph.adjacency[relation]
        for items in per_user.values():
            ordered = sorted(items)
            for i in range(len(ordered)):
                for j in range(i + 1, len(ordered)):
                    a, b = ordered[i], ordered[j]
                    adj.setdefault(a, {})[b] = adj.get(a, {}).get(b, 0) + 1
                    adj.setdefault(b, {})[a] = adj.get(b, {}).get(a, 0) + 1
    return graph


def sample_neighbors(graph: CoActionGraph, item_id: str, relation: str,
                     cap: int) -> list[str]:
    """Top-``cap`` neighbors by descending count, ties by ascending id."""
    nbrs = graph.neighbors(relation, item_id)
    ranked = sorted(nbrs.items(), key=lambda kv: (-kv[1], kv[0]))
    return [item for item, _ in ranked[:cap]]


def save_graph(graph: CoActionGraph, path: str) -> None:
    """Write ``relation<TAB>item_a<TAB>item_b<TAB>count`` with item_a < item_b."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for relation in RELATIONS:
            adj = graph.adjacency[relation]
            for a in sorted(adj):
                for b in sorted(adj[a]):
                    if a < b:
                        fh.write(f"{relation}\t{a}\t{b}\t{adj[a][b]}\n")


def load_graph(path: str) -> CoActionGraph:
    graph = CoActionGraph()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 fields")
            relation, a, b, count_tok = parts
            if relation not in RELATIONS:
                raise ValueError(f"{path}:{lineno}: unknown relation {relation!r}")
            if not a < b:
                raise ValueError(f"{path}:{lineno}: items not in ascending order")
            try:
                count = int(count_tok)
            except ValueError:
                raise ValueError(f"{path}:{lineno}: bad count {count_tok!r}") from None
            if count < 1:
                raise ValueError(f"{path}:{lineno}: count must be >= 1")
            adj = graph.adjacency[relation]
            adj.setdefault(a, {})[b] = count
            adj.setdefault(b, {})[a] = count
    return graph


class RelationAttention(nn.Module):
    """Attention over a padded neighbor set for one relation.

    Scores are a . leaky_relu(W @ [target; neighbor]); weights come from a
    masked softmax, and rows with no valid neighbor aggregate to a zero
    vector.
    """

    def __init__(self, dim: int, generator: torch.Generator):
        super().__init__()
        self.weight = nn.Parameter(_uniform((dim, 2 * dim), generator))
        self.attn = nn.Parameter(_uniform((dim,), generator))

    def forward(self, targets: torch.Tensor, neighbors: torch.Tensor,
                mask: torch.Tensor) -> torch.Tensor:
        """targets (n, d), neighbors (n, cap, d), mask (n, cap) bool."""
        n, cap, d = neighbors.shape
        expanded = targets.unsqueeze(1).expand(n, cap, d)
        pair = torch.cat([expanded, neighbors], dim=2)
        hidden = torch.nn.functional.leaky_relu(
            pair @ self.weight.T, negative_slope=LEAKY_SLOPE)
        scores = hidden @ self.attn
        scores = scores.masked_fill(~mask, -1e9)
        # max-subtraction keeps exp finite; all-masked rows then renormalize
        # against a denominator of at least one (the max slot), and the final
        # multiplication by the mask zeroes them exactly.
        alpha = torch.softmax(scores, dim=1) * mask.to(scores.dtype)
        return (alpha.unsqueeze(2) * neighbors).sum(dim=1)


class CoActionParams(nn.Module):
    """Per-relation attention plus the combine projection of the item tower."""

    def __init__(self, dim: int, generator: torch.Generator):
        super().__init__()
        self.click_attn = RelationAttention(dim, generator)
        self.purchase_attn = RelationAttention(dim, generator)
        self.combine_weight = nn.Parameter(_uniform((dim, 3 * dim), generator))
        self.combine_bias = nn.Parameter(torch.zeros(dim, dtype=torch.float64))

    def relation(self, name: str) -> RelationAttention:
        return self.click_attn if name == "click" else self.purchase_attn

    def combine(self, base: torch.Tensor, click_agg: torch.Tensor,
                purchase_agg: torch.Tensor) -> torch.Tensor:
        x = torch.cat([base, click_agg, purchase_agg], dim=-1)
        return x @ self.combine_weight.T + self.combine_bias


def aggregate_relation(target_emb: torch.Tensor, neighbor_embs: list[torch.Tensor],
                       attention: RelationAttention) -> torch.Tensor:
    """Aggregate one item's neighbor embeddings; empty list gives zeros."""
    d = target_emb.shape[0]
    if not neighbor_embs:
        return torch.zeros(d, dtype=target_emb.dtype)
    stacked = torch.stack(neighbor_embs).unsqueeze(0)
    mask = torch.ones(1, len(neighbor_embs), dtype=torch.bool)
    return attention(target_emb.unsqueeze(0), stacked, mask)[0]


def item_vector(base_emb: torch.Tensor, click_agg: torch.Tensor,
                purchase_agg: torch.Tensor, params: CoActionParams) -> torch.Tensor:
    """Final item-tower vector from the three components."""
    return params.combine(
        base_emb.unsqueeze(0), click_agg.unsqueeze(0), purchase_agg.unsqueeze(0))[0]
