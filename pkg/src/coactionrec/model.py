"""The two-tower model: co-action item tower and sequence-graph user tower.

Item tower: feature embedding e, attention aggregates over capped co-click /
co-purchase neighborhoods, affine combine to the final item vector z.
User tower: sequence graph -> stacked edge-aware attention -> K pooled
interest vectors. Ablation toggles disable individual components.

A trained model persists to a directory: config.txt (resolved hyperparams),
meta.json (vocabularies, value statistics, toggles), fingerprint.txt,
graph.tsv (co-action counts) and params/*.npy, plus the training metrics.log.
"""

from __future__ import annotations

import json
import os

import numpy as np
import torch
from torch import nn

from .coaction import CoActionGraph, CoActionParams, load_graph, sample_neighbors, save_graph
from .config import (AblationToggles, TrainConfig, config_fingerprint,
                     load_config, save_config)
from .datamodel import FeatureStore, UserSequence
from .embedding import EmbeddingTables
from .interaction import InteractionParams, explicit_interaction
from .interests import InterestParams, extract_interests
from .seqgraph import SequenceGraph, build_sequence_graph, edge_layout

__all__ = ["CoActionModel", "save_model", "load_model"]


class CoActionModel(nn.Module):
    def __init__(self, store: FeatureStore, cfg: TrainConfig,
                 toggles: AblationToggles | None = None):
        super().__init__()
        cfg.validate()
        self.store = store
        self.cfg = cfg
        self.toggles = toggles or AblationToggles()
        generator = torch.Generator().manual_seed(cfg.seed)

        self.tables = EmbeddingTables(
            store, cfg.dim, cfg.feature_dim, cfg.behavior_dim, generator)
        self.coaction = CoActionParams(cfg.dim, generator)
        self.edge_dim = edge_layout(store.schema, cfg.behavior_dim).width
        self.interaction = InteractionParams(
            cfg.dim, self.edge_dim, cfg.attn_dim, cfg.layers, generator,
            shared_qkv=cfg.shared_qkv)
        self.interests = InterestParams(
            cfg.dim, cfg.resolved_pool_dim(), cfg.interests, generator)

        self.item_ids = list(store.item_ids)
        self.item_index = {item: i for i, item in enumerate(self.item_ids)}
        rows = [store.row(i) for i in self.item_ids]
        self._item_codes = torch.tensor(
            [store.encode_codes(r) for r in rows], dtype=torch.int64)
        self._item_values = torch.tensor(
            [store.raw_values(r) for r in rows], dtype=torch.float64)

        cap = cfg.neighbor_cap
        n = len(self.item_ids)
        self._nbr_idx = {rel: torch.zeros(n, cap, dtype=torch.int64)
                         for rel in ("click", "purchase")}
        self._nbr_mask = {rel: torch.zeros(n, cap, dtype=torch.bool)
                          for rel in ("click", "purchase")}
        self.graph: CoActionGraph | None = None

    # -- item tower ---------------------------------------------------------

    def attach_graph(self, graph: CoActionGraph) -> None:
        """Precompute padded neighbor index tables from a co-action graph."""
        self.graph = graph
        cap = self.cfg.neighbor_cap
        for rel in ("click", "purchase"):
            idx = self._nbr_idx[rel]
            mask = self._nbr_mask[rel]
            idx.zero_()
            mask.zero_()
            for i, item in enumerate(self.item_ids):
                nbrs = [n for n in sample_neighbors(graph, item, rel, cap)
                        if n in self.item_index]
                for s, nbr in enumerate(nbrs):
                    idx[i, s] = self.item_index[nbr]
                    mask[i, s] = True

    def base_item_embeddings(self) -> torch.Tensor:
        """(n_items, d) feature embeddings e for the whole catalog."""
        return self.tables.embed_codes(self._item_codes, self._item_values)

    def item_vectors(self, base: torch.Tensor | None = None) -> torch.Tensor:
        """(n_items, d) final item-tower vectors z for the whole catalog."""
        e = self.base_item_embeddings() if base is None else base
        if self.toggles.drop_coaction:
            return e
        n, d = e.shape
        aggregates = {}
        for rel, dropped in (("click", self.toggles.drop_co_click),
                             ("purchase", self.toggles.drop_co_purchase)):
            if dropped:
                aggregates[rel] = torch.zeros(n, d, dtype=e.dtype)
            else:
                nbr = e[self._nbr_idx[rel]]
                aggregates[rel] = self.coaction.relation(rel)(
                    e, nbr, self._nbr_mask[rel])
        return self.coaction.combine(e, aggregates["click"], aggregates["purchase"])

    # -- user tower ----------------------------------------------------------

    def sequence_graph(self, sequence: UserSequence) -> SequenceGraph:
        known = [a for a in sequence.actions if self.store.has_item(a.item_id)]
        if not known:
            raise ValueError(
                f"user {sequence.user_id!r}: no actions with known items")
        graph = build_sequence_graph(
            UserSequence(sequence.user_id, known), self.store, self.tables)
        if self.toggles.drop_edge_feats:
            graph.edge_feats = torch.zeros_like(graph.edge_feats)
        return graph

    def hidden_from_graph(self, graph: SequenceGraph) -> torch.Tensor:
        if self.toggles.drop_seq_graph:
            return graph.node_embs
        return explicit_interaction(graph, self.interaction)

    def user_hidden(self, sequence: UserSequence) -> torch.Tensor:
        return self.hidden_from_graph(self.sequence_graph(sequence))

    def interests_from_hidden(self, hidden: torch.Tensor) -> torch.Tensor:
        return extract_interests(hidden, self.interests)

    def user_interests(self, sequence: UserSequence) -> torch.Tensor:
        """(K, d) interest vectors for one user history."""
        return self.interests_from_hidden(self.user_hidden(sequence))


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

def _meta_payload(model: CoActionModel) -> str:
    store = model.store
    meta = {
        "schema": {
            "onehot": list(store.schema.onehot),
            "numeric": list(store.schema.numeric),
            "ordinal": list(store.schema.ordinal),
        },
        "vocabs": [sorted(v.items()) for v in store.vocabs],
        "value_mean": [float(x) for x in store.value_mean],
        "value_std": [float(x) for x in store.value_std],
        "toggles": {
            "drop_co_click": model.toggles.drop_co_click,
            "drop_co_purchase": model.toggles.drop_co_purchase,
            "drop_coaction": model.toggles.drop_coaction,
            "drop_edge_feats": model.toggles.drop_edge_feats,
            "drop_seq_graph": model.toggles.drop_seq_graph,
        },
        "item_ids": model.item_ids,
    }
    return json.dumps(meta, sort_keys=True, separators=(",", ":")) + "\n"


def save_model(model: CoActionModel, out_dir: str) -> str:
    """Write the model directory; returns the config fingerprint."""
    if model.graph is None:
        raise ValueError("model has no co-action graph attached")
    os.makedirs(os.path.join(out_dir, "params"), exist_ok=True)
    save_config(model.cfg, os.path.join(out_dir, "config.txt"), extended=True)
    meta_text = _meta_payload(model)
    with open(os.path.join(out_dir, "meta.json"), "w", encoding="utf-8",
              newline="\n") as fh:
        fh.write(meta_text)
    fingerprint = config_fingerprint(model.cfg)
    with open(os.path.join(out_dir, "fingerprint.txt"), "w", encoding="utf-8",
              newline="\n") as fh:
        fh.write(fingerprint + "\n")
    save_graph(model.graph, os.path.join(out_dir, "graph.tsv"))
    for name, param in sorted(model.named_parameters()):
        np.save(os.path.join(out_dir, "params", f"{name}.npy"),
                param.detach().numpy())
    return fingerprint


def load_model(model_dir: str, store: FeatureStore) -> CoActionModel:
    """Rebuild a model from a directory against a feature store.

    The persisted vocabularies and value statistics are authoritative (items
    added to the store since training fall back to the unknown-code rows).
    """
    cfg_path = os.path.join(model_dir, "config.txt")
    if not os.path.exists(cfg_path):
        raise FileNotFoundError(cfg_path)
    cfg = load_config(cfg_path, extended=True)
    with open(os.path.join(model_dir, "meta.json"), "r", encoding="utf-8") as fh:
        meta_text = fh.read()
    meta = json.loads(meta_text)

    expected = config_fingerprint(cfg)
    with open(os.path.join(model_dir, "fingerprint.txt"), "r", encoding="utf-8") as fh:
        stored = fh.read().strip()
    if stored != expected:
        raise ValueError(f"{model_dir}: config fingerprint mismatch, the saved "
                         "configuration was modified after training")

    if meta["schema"]["onehot"] != list(store.schema.onehot) or \
            meta["schema"]["numeric"] != list(store.schema.numeric) or \
            meta["schema"]["ordinal"] != list(store.schema.ordinal):
        raise ValueError(f"{model_dir}: feature schema mismatch")

    store.vocabs = [{int(code): idx for code, idx in pairs}
                    for pairs in meta["vocabs"]]
    store.value_mean = np.array(meta["value_mean"], dtype=np.float64)
    store.value_std = np.array(meta["value_std"], dtype=np.float64)

    toggles = AblationToggles(**meta["toggles"])
    model = CoActionModel(store, cfg, toggles)
    params = dict(model.named_parameters())
    for name in sorted(params):
        arr = np.load(os.path.join(model_dir, "params", f"{name}.npy"))
        if tuple(arr.shape) != tuple(params[name].shape):
            raise ValueError(f"{model_dir}: shape mismatch for {name}")
        with torch.no_grad():
            params[name].copy_(torch.from_numpy(arr))
    model.attach_graph(load_graph(os.path.join(model_dir, "graph.tsv")))
    return model
