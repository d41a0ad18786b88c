"""Item and behavior embeddings.

Each one-hot feature gets its own embedding table (row 0 reserved for unseen
codes); numeric and ordinal values are standardized and concatenated with the
looked-up rows, then a single linear projection maps the result to the model
width d. Behaviors have a small dedicated table. Everything is float64.
"""

from __future__ import annotations

import torch
from torch import nn

from .datamodel import BehaviorType, FeatureStore, ItemFeatureRow

__all__ = ["EmbeddingTables", "embed_item", "embed_behavior",
           "export_embeddings", "load_embeddings", "format_vector"]

INIT_RANGE = 0.05
N_BEHAVIORS = 4


def _uniform(shape, generator):
    t = torch.empty(*shape, dtype=torch.float64)
    t.uniform_(-INIT_RANGE, INIT_RANGE, generator=generator)
    return t


class EmbeddingTables(nn.Module):
    """Feature tables + projection for items, and the behavior table."""

    def __init__(self, store: FeatureStore, dim: int, feature_dim: int,
                 behavior_dim: int, generator: torch.Generator):
        super().__init__()
        self.store = store
        self.dim = dim
        self.feature_dim = feature_dim
        self.behavior_dim = behavior_dim
        schema = store.schema
        self.tables = nn.ParameterList(
            nn.Parameter(_uniform((size, feature_dim), generator))
            for size in store.vocab_sizes()
        )
        n_values = schema.n_numeric + schema.n_ordinal
        in_dim = schema.n_onehot * feature_dim + n_values
        self.projection = nn.Parameter(_uniform((dim, in_dim), generator))
        self.projection_bias = nn.Parameter(torch.zeros(dim, dtype=torch.float64))
        self.behavior_table = nn.Parameter(_uniform((N_BEHAVIORS, behavior_dim), generator))
        self.register_buffer(
            "value_mean", torch.tensor(store.value_mean, dtype=torch.float64))
        self.register_buffer(
            "value_std", torch.tensor(store.value_std, dtype=torch.float64))

    def embed_codes(self, codes: torch.Tensor, values: torch.Tensor) -> torch.Tensor:
        """Embed pre-encoded items.

        codes: (n, n_onehot) int64 table indices; values: (n, n_values) raw
        numeric+ordinal values. Returns (n, dim).
        """
        parts = [self.tables[f][codes[:, f]] for f in range(codes.shape[1])]
        scaled = (values - self.value_mean) / self.value_std
        x = torch.cat(parts + [scaled], dim=1)
        return x @ self.projection.T + self.projection_bias

    def embed_rows(self, rows: list[ItemFeatureRow]) -> torch.Tensor:
        codes = torch.tensor(
            [self.store.encode_codes(r) for r in rows], dtype=torch.int64)
        values = torch.tensor(
            [self.store.raw_values(r) for r in rows], dtype=torch.float64)
        return self.embed_codes(codes, values)

    def embed_behaviors(self, behaviors: torch.Tensor) -> torch.Tensor:
        return self.behavior_table[behaviors]


def embed_item(features: ItemFeatureRow, tables: EmbeddingTables) -> torch.Tensor:
    """Embed a single item row to a (dim,) vector."""
    return tables.embed_rows([features])[0]


def embed_behavior(behavior: BehaviorType, tables: EmbeddingTables) -> torch.Tensor:
    return tables.behavior_table[int(behavior)]


def format_vector(vec) -> str:
    """Comma-joined components at 9 significant digits."""
    if isinstance(vec, torch.Tensor):
        vec = vec.detach()
    return ",".join(f"{float(v):.9g}" for v in vec)


def export_embeddings(ids: list[str], matrix, path: str) -> None:
    """Write ``id<TAB>v0,v1,...`` rows; one row per id, in the given order."""
    if len(ids) != len(matrix):
        raise ValueError("ids and matrix row count differ")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for i, item_id in enumerate(ids):
            fh.write(f"{item_id}\t{format_vector(matrix[i])}\n")


def load_embeddings(path: str) -> tuple[list[str], list[list[float]]]:
    ids: list[str] = []
    vectors: list[list[float]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 2 fields")
            ids.append(parts[0])
            vectors.append([float(v) for v in parts[1].split(",")])
    return ids, vectors
