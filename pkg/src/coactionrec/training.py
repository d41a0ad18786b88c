"""Training loop: sampled-softmax losses on both towers' item views.

Each training example is (user prefix, next clicked item). The user vector is
the interest (of K) that scores the positive best — a hard selection, so
gradients flow only through the selected interest. The loss is computed twice
per example with shared negatives: against the co-action item vectors z and,
weighted by aux_weight, against the plain feature embeddings e.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .coaction import build_coaction_graph
from .config import AblationToggles, TrainConfig
from .datamodel import BehaviorType, DatasetSplit, FeatureStore, UserSequence
from .interests import first_argmax
from .model import CoActionModel

__all__ = ["TrainingDiverged", "TrainResult", "user_examples",
           "sampled_softmax_loss", "example_loss", "train"]

MASK_VALUE = -1e9


class TrainingDiverged(RuntimeError):
    """Raised when a batch loss turns NaN/inf; names the epoch and batch."""


@dataclass
class TrainResult:
    model: CoActionModel
    history: list[tuple[int, float]]
    n_examples: int


def user_examples(sequence: UserSequence, item_index: dict[str, int]) -> list[tuple[int, int]]:
    """(prefix_length, target_item_index) pairs for one user.

    Every clicked position with at least one predecessor becomes a target;
    the prefix is everything strictly before it.
    """
    out = []
    for t in range(1, len(sequence.actions)):
        action = sequence.actions[t]
        if action.behavior == BehaviorType.CLICK and action.item_id in item_index:
            out.append((t, item_index[action.item_id]))
    return out


def sampled_softmax_loss(user_vec: torch.Tensor, pos_vec: torch.Tensor,
                         neg_vecs: torch.Tensor) -> torch.Tensor:
    """-log softmax probability of the positive among {positive} + negatives.

    logsumexp performs the usual max-subtraction, so large logits are safe.
    """
    logits = torch.cat([(user_vec * pos_vec).sum().reshape(1), neg_vecs @ user_vec])
    return torch.logsumexp(logits, dim=0) - logits[0]


def example_loss(model: CoActionModel, sequence: UserSequence, prefix_len: int,
                 target_id: str, negative_ids: list[str],
                 z_all: torch.Tensor | None = None,
                 e_all: torch.Tensor | None = None) -> torch.Tensor:
    """Full dual loss of a single example (reference path, used by tests)."""
    if e_all is None:
        e_all = model.base_item_embeddings()
    if z_all is None:
        z_all = model.item_vectors(base=e_all)
    prefix = UserSequence(sequence.user_id, sequence.actions[:prefix_len])
    hidden = model.user_hidden(prefix)
    interests = model.interests_from_hidden(hidden)
    pos = model.item_index[target_id]
    negs = [model.item_index[n] for n in negative_ids]
    total = torch.zeros((), dtype=torch.float64)
    weights = (1.0, model.cfg.aux_weight)
    for weight, catalog in zip(weights, (z_all, e_all)):
        sel = first_argmax((interests @ catalog[pos]).detach())
        total = total + weight * sampled_softmax_loss(
            interests[sel], catalog[pos], catalog[negs])
    return total


def _pooling_scores(model: CoActionModel, hidden: torch.Tensor) -> torch.Tensor:
    """(K, T) pre-softmax pooling scores over the full sequence."""
    return (torch.tanh(hidden @ model.interests.pool_hidden)
            @ model.interests.pool_out).T


def _group_loss(model: CoActionModel, hidden: torch.Tensor,
                prefix_lens: np.ndarray, positives: np.ndarray,
                negatives: np.ndarray, z_all: torch.Tensor,
                e_all: torch.Tensor) -> torch.Tensor:
    """Sum of example losses for one user's examples.

    One causal forward already produced ``hidden`` for the full sequence; the
    additive mask under the pooling softmax reproduces each prefix exactly
    (future positions get zero weight), so prefixes share the computation.
    """
    t_len = hidden.shape[0]
    m = len(prefix_lens)
    scores = _pooling_scores(model, hidden)                       # (K, T)
    pos_t = torch.from_numpy(positives)
    neg_t = torch.from_numpy(negatives)
    valid = (torch.arange(t_len).unsqueeze(0)
             < torch.from_numpy(prefix_lens).unsqueeze(1))        # (m, T)
    masked = scores.unsqueeze(0) + torch.where(
        valid, 0.0, MASK_VALUE).to(torch.float64).unsqueeze(1)    # (m, K, T)
    pooled = torch.softmax(masked, dim=2)
    interests = pooled @ hidden                                   # (m, K, d)

    cand = torch.cat([pos_t.unsqueeze(1), neg_t], dim=1)          # (m, 1+n)
    total = torch.zeros((), dtype=torch.float64)
    weights = (1.0, model.cfg.aux_weight)
    for weight, catalog in zip(weights, (z_all, e_all)):
        target_vecs = catalog[pos_t]                              # (m, d)
        sel = torch.einsum("mkd,md->mk", interests, target_vecs).detach().argmax(dim=1)
        user_vecs = interests[torch.arange(m), sel]               # (m, d)
        logits = torch.einsum("mcd,md->mc", catalog[cand], user_vecs)
        loss = torch.logsumexp(logits, dim=1) - logits[:, 0]
        total = total + weight * loss.sum()
    return total


def _draw_negatives(rng: np.random.Generator, positives: np.ndarray,
                    n_items: int, n_neg: int) -> np.ndarray:
    """Uniform over the catalog excluding each row's positive."""
    draws = rng.integers(0, n_items - 1, size=(len(positives), n_neg))
    return draws + (draws >= positives[:, None])


def train(store: FeatureStore, split: DatasetSplit, cfg: TrainConfig,
          toggles: AblationToggles | None = None,
          log_cb=None) -> TrainResult:
    """Train a model on the split's train partition.

    Deterministic for a fixed config: parameter init comes from a torch
    generator seeded with cfg.seed, and shuffling plus negative sampling come
    from one numpy generator with the same seed.
    """
    model = CoActionModel(store, cfg, toggles)

    sequences = []
    for seq in split.train:
        known = [a for a in seq.actions if store.has_item(a.item_id)]
        if known:
            sequences.append(UserSequence(seq.user_id, known))
    if not sequences:
        raise ValueError("no trainable sequences (no items with features)")

    records = [a for seq in sequences for a in seq.actions]
    model.attach_graph(build_coaction_graph(records))

    examples = []      # (sequence, [(prefix_len, pos_index), ...])
    for seq in sequences:
        ex = user_examples(seq, model.item_index)
        if ex:
            examples.append((seq, ex))
    n_examples = sum(len(ex) for _, ex in examples)
    if n_examples == 0:
        raise ValueError("no training examples (need clicks after position 0)")

    n_items = len(model.item_ids)
    if n_items < cfg.negatives + 1:
        raise ValueError(
            f"catalog of {n_items} items cannot supply {cfg.negatives} negatives")

    if cfg.optimizer == "adam":
        opt = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    else:
        opt = torch.optim.SGD(model.parameters(), lr=cfg.lr)

    rng = np.random.default_rng(cfg.seed)
    history = []
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(examples))
        epoch_loss = 0.0
        batch: list[tuple[UserSequence, list[tuple[int, int]], np.ndarray]] = []
        batch_examples = 0
        batch_no = 0
        for pos in range(len(order)):
            seq, ex = examples[order[pos]]
            positives = np.array([p for _, p in ex], dtype=np.int64)
            negs = _draw_negatives(rng, positives, n_items, cfg.negatives)
            batch.append((seq, ex, negs))
            batch_examples += len(ex)
            if batch_examples < cfg.batch and pos != len(order) - 1:
                continue

            batch_no += 1
            opt.zero_grad()
            e_all = model.base_item_embeddings()
            z_all = model.item_vectors(base=e_all)
            total = torch.zeros((), dtype=torch.float64)
            for bseq, bex, bnegs in batch:
                hidden = model.user_hidden(bseq)
                prefix_lens = np.array([t for t, _ in bex], dtype=np.int64)
                bpos = np.array([p for _, p in bex], dtype=np.int64)
                total = total + _group_loss(
                    model, hidden, prefix_lens, bpos, bnegs, z_all, e_all)
            mean = total / batch_examples
            if not torch.isfinite(mean):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}, batch {batch_no}")
            mean.backward()
            opt.step()
            epoch_loss += float(total.detach())
            batch = []
            batch_examples = 0

        epoch_mean = epoch_loss / n_examples
        history.append((epoch, epoch_mean))
        if log_cb is not None:
            log_cb(epoch, epoch_mean)

    return TrainResult(model=model, history=history, n_examples=n_examples)


def format_history(history: list[tuple[int, float]]) -> str:
    """metrics.log payload: one ``epoch<TAB>loss`` line per epoch."""
    return "".join(f"{epoch}\t{loss!r}\n" for epoch, loss in history)
