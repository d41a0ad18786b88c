"""Multi-interest extraction by self-attentive pooling.

A two-matrix scorer produces K weight distributions over the sequence
positions; each interest vector is the weighted sum of hidden states under
its distribution.
"""

from __future__ import annotations

import torch
from torch import nn

from .embedding import _uniform

__all__ = ["InterestParams", "pooling_weights", "extract_interests",
           "select_interest", "score_item", "first_argmax"]


class InterestParams(nn.Module):
    """pool_hidden: (d, d_a); pool_out: (d_a, K)."""

    def __init__(self, dim: int, pool_dim: int, interests: int,
                 generator: torch.Generator):
        super().__init__()
        self.pool_hidden = nn.Parameter(_uniform((dim, pool_dim), generator))
        self.pool_out = nn.Parameter(_uniform((pool_dim, interests), generator))
        self.n_interests = interests


def pooling_weights(hidden: torch.Tensor, params: InterestParams) -> torch.Tensor:
    """(K, T) softmax weights over positions for each interest."""
    scores = (torch.tanh(hidden @ params.pool_hidden) @ params.pool_out).T
    return torch.softmax(scores, dim=1)


def extract_interests(hidden: torch.Tensor, params: InterestParams) -> torch.Tensor:
    """(K, d) interest vectors from hidden states (T, d)."""
    return pooling_weights(hidden, params) @ hidden


def first_argmax(values: torch.Tensor) -> int:
    """Index of the maximum; ties resolve to the smallest index."""
    return int(torch.nonzero(values == values.max())[0, 0])


def select_interest(interests: torch.Tensor, target: torch.Tensor) -> tuple[int, torch.Tensor]:
    """Pick the interest with the highest inner product against the target."""
    idx = first_argmax(interests @ target)
    return idx, interests[idx]


def score_item(interests: torch.Tensor, item_vec: torch.Tensor) -> torch.Tensor:
    """Retrieval score: max over interests of the inner product."""
    return (interests @ item_vec).max()
