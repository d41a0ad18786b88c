"""Per-user sequence graphs with explicit pairwise edge features.

For positions i >= j (j happened no later than i) the edge vector concatenates,
in order: the behavior embeddings of both actions, a behavior-equality
indicator, the time gap in days, one equality indicator per one-hot feature,
one signed gap per numeric feature, and one order sign per ordinal feature.
Pairs with i < j get an all-zero vector, giving a lower-triangular edge
tensor; self pairs (i == j) are materialized like any other valid pair.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

from .datamodel import ActionRecord, FeatureSchema, FeatureStore, ItemFeatureRow, UserSequence
from .embedding import EmbeddingTables

__all__ = ["SECONDS_PER_DAY", "feat_equal", "feat_gap", "feat_order",
           "EdgeLayout", "edge_layout", "edge_features",
           "SequenceGraph", "build_sequence_graph", "dump_edges"]

SECONDS_PER_DAY = 86400.0


def feat_equal(a, b) -> float:
    """1 if the two values are equal, else 0."""
    return 1.0 if a == b else 0.0


def feat_gap(a: float, b: float) -> float:
    """Signed difference, second minus first."""
    return float(b) - float(a)


def feat_order(a, b) -> float:
    """Sign of b - a: -1, 0 or 1."""
    return float(bool(b > a)) - float(bool(b < a))


@dataclass(frozen=True)
class EdgeLayout:
    """Slice positions of each block inside an edge vector."""

    behavior_i: slice
    behavior_j: slice
    behavior_equal: int
    time_gap: int
    onehot_equal: slice
    numeric_gap: slice
    ordinal_order: slice
    width: int


def edge_layout(schema: FeatureSchema, behavior_dim: int) -> EdgeLayout:
    db = behavior_dim
    g, n_num, n_ord = schema.n_onehot, schema.n_numeric, schema.n_ordinal
    start = 2 * db + 2
    return EdgeLayout(
        behavior_i=slice(0, db),
        behavior_j=slice(db, 2 * db),
        behavior_equal=2 * db,
        time_gap=2 * db + 1,
        onehot_equal=slice(start, start + g),
        numeric_gap=slice(start + g, start + g + n_num),
        ordinal_order=slice(start + g + n_num, start + g + n_num + n_ord),
        width=start + g + n_num + n_ord,
    )


def edge_features(action_i: ActionRecord, row_i: ItemFeatureRow,
                  action_j: ActionRecord, row_j: ItemFeatureRow,
                  tables: EmbeddingTables) -> torch.Tensor:
    """Edge vector for the ordered pair (later position i, earlier position j)."""
    parts = [
        tables.behavior_table[int(action_i.behavior)],
        tables.behavior_table[int(action_j.behavior)],
        torch.tensor([feat_equal(action_i.behavior, action_j.behavior)],
                     dtype=torch.float64),
        torch.tensor([feat_gap(action_i.timestamp, action_j.timestamp)
                      / SECONDS_PER_DAY], dtype=torch.float64),
        torch.tensor([feat_equal(a, b) for a, b in zip(row_i.onehot, row_j.onehot)],
                     dtype=torch.float64),
        torch.tensor([feat_gap(a, b) for a, b in zip(row_i.numeric, row_j.numeric)],
                     dtype=torch.float64),
        torch.tensor([feat_order(a, b) for a, b in zip(row_i.ordinal, row_j.ordinal)],
                     dtype=torch.float64),
    ]
    return torch.cat(parts)


@dataclass
class SequenceGraph:
    """Dense tensors for one user sequence.

    node_embs: (T, d) item embeddings in sequence order;
    edge_feats: (T, T, d_e), row i / column j = features of pair (i, j),
    zero above the diagonal.
    """

    node_embs: torch.Tensor
    edge_feats: torch.Tensor
    items: list[str]


def build_sequence_graph(sequence: UserSequence, store: FeatureStore,
                         tables: EmbeddingTables) -> SequenceGraph:
    if not sequence.actions:
        raise ValueError(f"user {sequence.user_id!r} has an empty sequence")
    rows = [store.row(a.item_id) for a in sequence.actions]
    t_len = len(rows)
    schema = store.schema
    layout = edge_layout(schema, tables.behavior_dim)

    node_embs = tables.embed_rows(rows)

    behaviors = torch.tensor([int(a.behavior) for a in sequence.actions],
                             dtype=torch.int64)
    times = torch.tensor([a.timestamp for a in sequence.actions],
                         dtype=torch.float64)
    onehot = torch.tensor([list(r.onehot) for r in rows], dtype=torch.int64)
    numeric = torch.tensor([list(r.numeric) for r in rows], dtype=torch.float64)
    ordinal = torch.tensor([list(r.ordinal) for r in rows], dtype=torch.float64)

    e = torch.zeros(t_len, t_len, layout.width, dtype=torch.float64)
    beh_emb = tables.embed_behaviors(behaviors)
    e[:, :, layout.behavior_i] = beh_emb.unsqueeze(1).expand(t_len, t_len, -1)
    e[:, :, layout.behavior_j] = beh_emb.unsqueeze(0).expand(t_len, t_len, -1)
    e[:, :, layout.behavior_equal] = (
        behaviors.unsqueeze(1) == behaviors.unsqueeze(0)).to(torch.float64)
    e[:, :, layout.time_gap] = (
        times.unsqueeze(0) - times.unsqueeze(1)) / SECONDS_PER_DAY
    e[:, :, layout.onehot_equal] = (
        onehot.unsqueeze(1) == onehot.unsqueeze(0)).to(torch.float64)
    e[:, :, layout.numeric_gap] = numeric.unsqueeze(0) - numeric.unsqueeze(1)
    e[:, :, layout.ordinal_order] = torch.sign(
        ordinal.unsqueeze(0) - ordinal.unsqueeze(1))

    tri = torch.tril(torch.ones(t_len, t_len, dtype=torch.float64)).unsqueeze(2)
    e = e * tri

    return SequenceGraph(node_embs=node_embs, edge_feats=e,
                         items=[a.item_id for a in sequence.actions])


def dump_edges(graph: SequenceGraph) -> str:
    """Debug dump: one ``i<TAB>j<TAB>v0,v1,...`` row per valid (i >= j) pair."""
    from .embedding import format_vector
    lines = []
    t_len = graph.edge_feats.shape[0]
    for i in range(t_len):
        for j in range(i + 1):
            lines.append(f"{i}\t{j}\t{format_vector(graph.edge_feats[i, j])}")
    return "\n".join(lines) + "\n"
