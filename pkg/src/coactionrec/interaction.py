"""Stacked edge-aware attention over a user's sequence graph.

Each layer projects the running hidden states to queries/keys/values, scores
every admissible pair (j <= i, self included) through a small MLP that also
sees the pair's edge features, masks future positions additively, and adds
the attention-weighted values back onto the hidden states (residual). Edge
features are fixed across layers.
"""

from __future__ import annotations

import torch
from torch import nn

from .embedding import _uniform
from .seqgraph import SequenceGraph

__all__ = ["MASK_VALUE", "LayerParams", "InteractionParams",
           "explicit_interaction", "attention_row"]

MASK_VALUE = -1e9
LEAKY_SLOPE = 0.2


class LayerParams(nn.Module):
    """One attention layer's parameters.

    Projections are (d, d) matrices applied as matrix-vector products;
    attn_hidden is (attn_dim, 3d + d_e) over [query; key; query*key; edge].
    """

    def __init__(self, dim: int, edge_dim: int, attn_dim: int,
                 generator: torch.Generator):
        super().__init__()
        self.query_proj = nn.Parameter(_uniform((dim, dim), generator))
        self.key_proj = nn.Parameter(_uniform((dim, dim), generator))
        self.value_proj = nn.Parameter(_uniform((dim, dim), generator))
        self.attn_hidden = nn.Parameter(
            _uniform((attn_dim, 3 * dim + edge_dim), generator))
        self.attn_out = nn.Parameter(_uniform((attn_dim,), generator))


class InteractionParams(nn.Module):
    def __init__(self, dim: int, edge_dim: int, attn_dim: int, layers: int,
                 generator: torch.Generator, shared_qkv: bool = False):
        super().__init__()
        self.n_layers = layers
        self.shared_qkv = shared_qkv
        n_param_sets = 1 if shared_qkv else layers
        self.layers = nn.ModuleList(
            LayerParams(dim, edge_dim, attn_dim, generator)
            for _ in range(n_param_sets))

    def layer(self, index: int) -> LayerParams:
        return self.layers[0 if self.shared_qkv else index]


def _layer_scores(h: torch.Tensor, edge_feats: torch.Tensor,
                  layer: LayerParams) -> tuple[torch.Tensor, torch.Tensor]:
    """Raw pair scores (T, T) and values (T, d) for one layer."""
    t_len, d = h.shape
    q = h @ layer.query_proj.T
    k = h @ layer.key_proj.T
    v = h @ layer.value_proj.T
    pair = torch.cat([
        q.unsqueeze(1).expand(t_len, t_len, d),
        k.unsqueeze(0).expand(t_len, t_len, d),
        q.unsqueeze(1) * k.unsqueeze(0),
        edge_feats,
    ], dim=2)
    hidden = torch.nn.functional.leaky_relu(
        pair @ layer.attn_hidden.T, negative_slope=LEAKY_SLOPE)
    return hidden @ layer.attn_out, v


def _causal_mask(t_len: int) -> torch.Tensor:
    allowed = torch.tril(torch.ones(t_len, t_len, dtype=torch.bool))
    return torch.where(allowed, 0.0, MASK_VALUE).to(torch.float64)


def explicit_interaction(graph: SequenceGraph, params: InteractionParams,
                         return_attention: bool = False):
    """Run the full attention stack; returns final hidden states (T, d).

    With return_attention=True also returns the per-layer (T, T) attention
    matrices (softmax output; masked entries are exactly zero).
    """
    h = graph.node_embs
    t_len = h.shape[0]
    mask = _causal_mask(t_len)
    attn_all = []
    for li in range(params.n_layers):
        layer = params.layer(li)
        scores, v = _layer_scores(h, graph.edge_feats, layer)
        alpha = torch.softmax(scores + mask, dim=1)
        h = h + alpha @ v
        if return_attention:
            attn_all.append(alpha)
    if return_attention:
        return h, attn_all
    return h


def attention_row(graph: SequenceGraph, params: InteractionParams,
                  layer_index: int, position: int) -> torch.Tensor:
    """Attention weights of one position at one layer (diagnostic view)."""
    _, attn = explicit_interaction(graph, params, return_attention=True)
    return attn[layer_index][position]
