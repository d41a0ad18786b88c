"""Synthetic interaction corpus with planted co-action structure.

The generator plants two recoverable patterns: users re-click items they saw
before (repeated views) and purchase fixed complementary item pairs, so that
sequence models and co-purchase graphs both have signal to find. Output files
are byte-identical for identical config and seed.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .datamodel import (
    DEFAULT_SCHEMA,
    ActionRecord,
    BehaviorType,
    ItemFeatureRow,
    write_interactions,
    write_item_features,
)

__all__ = ["SynthConfig", "generate_synthetic", "complement_partner"]


@dataclass
class SynthConfig:
    users: int = 100
    items: int = 500
    categories: int = 10
    sellers: int = 20
    min_len: int = 8
    max_len: int = 24
    repeated_view_rate: float = 0.3
    complementary_purchase_rate: float = 0.3
    preferred_categories: int = 2
    start_timestamp: int = 1_600_000_000

    def validate(self) -> None:
        if self.users < 1 or self.items < 2:
            raise ValueError("need at least 1 user and 2 items")
        if self.categories < 1 or self.sellers < 1:
            raise ValueError("need at least 1 category and 1 seller")
        if not 2 <= self.min_len <= self.max_len:
            raise ValueError("need 2 <= min_len <= max_len")
        for rate in (self.repeated_view_rate, self.complementary_purchase_rate):
            if not 0.0 <= rate <= 1.0:
                raise ValueError("rates must lie in [0, 1]")
        if self.preferred_categories < 1:
            raise ValueError("preferred_categories must be >= 1")


def complement_partner(index: int) -> int:
    """Items are paired (0,1), (2,3), ...; returns the partner index."""
    return index ^ 1


def _item_id(index: int, width: int) -> str:
    return f"i{index:0{width}d}"


def _user_id(index: int, width: int) -> str:
    return f"u{index:0{width}d}"


# behavior draw for ordinary (unplanted) actions
_BEHAVIOR_CHOICES = [BehaviorType.CLICK, BehaviorType.WATCH, BehaviorType.CART,
                     BehaviorType.PURCHASE]
_BEHAVIOR_PROBS = [0.80, 0.08, 0.07, 0.05]


def generate_synthetic(cfg: SynthConfig, seed: int, out_dir: str) -> tuple[str, str]:
    """Write ``interactions.tsv`` and ``item_features.tsv`` under out_dir.

    Returns the two file paths.
    """
    cfg.validate()
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(seed)

    iw = max(4, len(str(cfg.items - 1)))
    uw = max(4, len(str(cfg.users - 1)))

    # --- item side information -------------------------------------------
    leaf = rng.integers(0, cfg.categories, size=cfg.items)
    seller = rng.integers(0, cfg.sellers, size=cfg.items)
    cat_price = rng.normal(3.0, 0.8, size=cfg.categories)
    log_price = cat_price[leaf] + rng.normal(0.0, 0.3, size=cfg.items)
    seller_level = rng.integers(1, 6, size=cfg.items)
    # price bucket = quintile rank of log_price over the catalog
    order = np.argsort(log_price, kind="stable")
    bucket = np.empty(cfg.items, dtype=np.int64)
    bucket[order] = (np.arange(cfg.items) * 5) // cfg.items

    rows = []
    for i in range(cfg.items):
        rows.append(
            ItemFeatureRow(
                item_id=_item_id(i, iw),
                onehot=(i, int(leaf[i]), int(leaf[i]) // 2, int(seller[i])),
                numeric=(float(log_price[i]),),
                ordinal=(int(seller_level[i]), int(bucket[i])),
            )
        )

    items_by_cat: list[np.ndarray] = [
        np.flatnonzero(leaf == c) for c in range(cfg.categories)
    ]

    # --- user sequences ----------------------------------------------------
    records: list[ActionRecord] = []
    n_pref = min(cfg.preferred_categories, cfg.categories)
    for u in range(cfg.users):
        prefs = rng.choice(cfg.categories, size=n_pref, replace=False)
        pool = np.concatenate([items_by_cat[c] for c in prefs])
        if pool.size == 0:
            pool = np.arange(cfg.items)
        length = int(rng.integers(cfg.min_len, cfg.max_len + 1))
        item_idx = rng.choice(pool, size=length, replace=True)
        behaviors = rng.choice(len(_BEHAVIOR_CHOICES), size=length, p=_BEHAVIOR_PROBS)

        # plant a complementary purchase: both halves of a fixed pair
        if rng.random() < cfg.complementary_purchase_rate:
            a = int(rng.choice(pool))
            b = complement_partner(a)
            if b >= cfg.items:
                b = a - 1 if a > 0 else a + 1
            p, q = sorted(rng.choice(length, size=2, replace=False))
            item_idx[p], behaviors[p] = a, BehaviorType.PURCHASE
            item_idx[q], behaviors[q] = b, BehaviorType.PURCHASE

        # plant a repeated view: copy an earlier position's item forward.
        # Planted second so a rate of 1.0 guarantees a duplicate per sequence.
        if rng.random() < cfg.repeated_view_rate:
            p, q = sorted(rng.choice(length, size=2, replace=False))
            item_idx[q] = item_idx[p]
            behaviors[p] = BehaviorType.CLICK
            behaviors[q] = BehaviorType.CLICK

        t = cfg.start_timestamp + int(rng.integers(0, 86_400))
        gaps = rng.integers(60, 7_200, size=length)
        user = _user_id(u, uw)
        for pos in range(length):
            records.append(
                ActionRecord(
                    user_id=user,
                    item_id=_item_id(int(item_idx[pos]), iw),
                    behavior=BehaviorType(int(behaviors[pos])),
                    timestamp=t,
                )
            )
            t += int(gaps[pos])

    interactions_path = os.path.join(out_dir, "interactions.tsv")
    features_path = os.path.join(out_dir, "item_features.tsv")
    write_interactions(records, interactions_path)
    write_item_features(rows, features_path, DEFAULT_SCHEMA)
    return interactions_path, features_path
