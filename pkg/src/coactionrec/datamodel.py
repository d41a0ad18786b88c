"""Interaction and item-feature records, corpus file IO, sequences and splits.

All downstream modules consume the types defined here. File formats are plain
TSV with LF line endings so that repeated runs are byte-comparable.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

__all__ = [
    "BehaviorType",
    "ActionRecord",
    "ItemFeatureRow",
    "UserSequence",
    "FeatureSchema",
    "DEFAULT_SCHEMA",
    "EvalCase",
    "DatasetSplit",
    "CorpusFormatError",
    "FeatureStore",
    "load_interactions",
    "write_interactions",
    "load_item_features",
    "write_item_features",
    "build_sequences",
    "filter_min_count",
    "split_dataset",
]


class BehaviorType(IntEnum):
    CLICK = 0
    WATCH = 1
    CART = 2
    PURCHASE = 3


_BEHAVIOR_TOKENS = {
    "click": BehaviorType.CLICK,
    "watch": BehaviorType.WATCH,
    "cart": BehaviorType.CART,
    "purchase": BehaviorType.PURCHASE,
}
_TOKEN_OF_BEHAVIOR = {v: k for k, v in _BEHAVIOR_TOKENS.items()}


def behavior_from_token(token: str) -> BehaviorType:
    try:
        return _BEHAVIOR_TOKENS[token]
    except KeyError:
        raise ValueError(f"unknown behavior token {token!r}") from None


def behavior_token(behavior: BehaviorType) -> str:
    return _TOKEN_OF_BEHAVIOR[BehaviorType(behavior)]


class CorpusFormatError(ValueError):
    """Malformed corpus file; message carries the file path and line number."""


@dataclass(frozen=True)
class ActionRecord:
    user_id: str
    item_id: str
    behavior: BehaviorType
    timestamp: int


@dataclass(frozen=True)
class ItemFeatureRow:
    """One item's side information.

    ``onehot`` holds integer category codes, ``numeric`` real-valued features
    and ``ordinal`` integer ranks, in schema order.
    """

    item_id: str
    onehot: tuple[int, ...]
    numeric: tuple[float, ...]
    ordinal: tuple[int, ...]


@dataclass
class UserSequence:
    user_id: str
    actions: list[ActionRecord]

    def __len__(self) -> int:
        return len(self.actions)


@dataclass(frozen=True)
class FeatureSchema:
    """Names of the item feature columns, grouped by type."""

    onehot: tuple[str, ...]
    numeric: tuple[str, ...]
    ordinal: tuple[str, ...]

    @property
    def n_onehot(self) -> int:
        return len(self.onehot)

    @property
    def n_numeric(self) -> int:
        return len(self.numeric)

    @property
    def n_ordinal(self) -> int:
        return len(self.ordinal)

    @property
    def n_features(self) -> int:
        return self.n_onehot + self.n_numeric + self.n_ordinal

    @property
    def columns(self) -> tuple[str, ...]:
        return self.onehot + self.numeric + self.ordinal


DEFAULT_SCHEMA = FeatureSchema(
    onehot=("item_code", "leaf_category", "parent_category", "seller"),
    numeric=("log_price",),
    ordinal=("seller_level", "price_bucket"),
)


@dataclass
class EvalCase:
    """A held-out user: history fed to the model, target items to recover."""

    user_id: str
    history: list[ActionRecord]
    targets: list[str]


@dataclass
class DatasetSplit:
    train: list[UserSequence]
    validation: list[EvalCase]
    test: list[EvalCase]

    @property
    def train_records(self) -> list[ActionRecord]:
        out: list[ActionRecord] = []
        for seq in self.train:
            out.extend(seq.actions)
        return out


# ---------------------------------------------------------------------------
# file IO
# ---------------------------------------------------------------------------

def load_interactions(path: str) -> list[ActionRecord]:
    """Read a ``user_id  item_id  behavior  timestamp`` TSV.

    Raises CorpusFormatError with the offending line number on malformed
    rows, unknown behavior tokens, or negative timestamps.
    """
    records: list[ActionRecord] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise CorpusFormatError(
                    f"{path}:{lineno}: expected 4 tab-separated fields, got {len(parts)}"
                )
            user_id, item_id, beh_tok, ts_tok = parts
            if not user_id or not item_id:
                raise CorpusFormatError(f"{path}:{lineno}: empty user or item id")
            try:
                behavior = behavior_from_token(beh_tok)
            except ValueError:
                raise CorpusFormatError(
                    f"{path}:{lineno}: unknown behavior token {beh_tok!r}"
                ) from None
            try:
                timestamp = int(ts_tok)
            except ValueError:
                raise CorpusFormatError(
                    f"{path}:{lineno}: bad timestamp {ts_tok!r}"
                ) from None
            if timestamp < 0:
                raise CorpusFormatError(f"{path}:{lineno}: negative timestamp")
            records.append(ActionRecord(user_id, item_id, behavior, timestamp))
    return records


def write_interactions(records: list[ActionRecord], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            fh.write(f"{r.user_id}\t{r.item_id}\t{behavior_token(r.behavior)}\t{r.timestamp}\n")


def load_item_features(path: str, schema: FeatureSchema = DEFAULT_SCHEMA) -> list[ItemFeatureRow]:
    """Read the item feature TSV (header row, then one row per item)."""
    rows: list[ItemFeatureRow] = []
    expected_header = ("item_id",) + schema.columns
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if tuple(header.split("\t")) != expected_header:
            raise CorpusFormatError(
                f"{path}:1: header mismatch, expected {list(expected_header)}"
            )
        seen: set[str] = set()
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 1 + schema.n_features:
                raise CorpusFormatError(
                    f"{path}:{lineno}: expected {1 + schema.n_features} fields, got {len(parts)}"
                )
            item_id = parts[0]
            if not item_id:
                raise CorpusFormatError(f"{path}:{lineno}: empty item id")
            if item_id in seen:
                raise CorpusFormatError(f"{path}:{lineno}: duplicate item id {item_id!r}")
            seen.add(item_id)
            try:
                g = schema.n_onehot
                onehot = tuple(int(v) for v in parts[1 : 1 + g])
                numeric = tuple(float(v) for v in parts[1 + g : 1 + g + schema.n_numeric])
                ordinal = tuple(int(v) for v in parts[1 + g + schema.n_numeric :])
            except ValueError:
                raise CorpusFormatError(f"{path}:{lineno}: bad feature value") from None
            rows.append(ItemFeatureRow(item_id, onehot, numeric, ordinal))
    return rows


def write_item_features(
    rows: list[ItemFeatureRow], path: str, schema: FeatureSchema = DEFAULT_SCHEMA
) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\t".join(("item_id",) + schema.columns) + "\n")
        for row in rows:
            parts = [row.item_id]
            parts.extend(str(v) for v in row.onehot)
            parts.extend(f"{v:.6f}" for v in row.numeric)
            parts.extend(str(v) for v in row.ordinal)
            fh.write("\t".join(parts) + "\n")


# ---------------------------------------------------------------------------
# feature store
# ---------------------------------------------------------------------------

class FeatureStore:
    """Item feature rows plus the vocabularies and value statistics derived
    from them.

    Vocabularies map raw one-hot codes to table indices; index 0 of every
    table is reserved for unseen codes, and lookups of unknown codes are
    counted in ``unknown_lookups`` instead of raising.
    """

    def __init__(self, rows: list[ItemFeatureRow], schema: FeatureSchema = DEFAULT_SCHEMA):
        if not rows:
            raise ValueError("feature store needs at least one item row")
        self.schema = schema
        self.rows = {row.item_id: row for row in rows}
        self.item_ids = sorted(self.rows)
        # vocabularies: sorted raw codes, index 0 reserved for unknowns
        self.vocabs: list[dict[int, int]] = []
        for f in range(schema.n_onehot):
            codes = sorted({row.onehot[f] for row in rows})
            self.vocabs.append({c: i + 1 for i, c in enumerate(codes)})
        values = np.array(
            [list(r.numeric) + list(r.ordinal) for r in rows], dtype=np.float64
        )
        self.value_mean = values.mean(axis=0)
        std = values.std(axis=0)
        std[std == 0.0] = 1.0
        self.value_std = std
        self.unknown_lookups = 0

    @property
    def n_items(self) -> int:
        return len(self.item_ids)

    def vocab_sizes(self) -> list[int]:
        return [len(v) + 1 for v in self.vocabs]

    def row(self, item_id: str) -> ItemFeatureRow:
        return self.rows[item_id]

    def has_item(self, item_id: str) -> bool:
        return item_id in self.rows

    def encode_codes(self, row: ItemFeatureRow) -> list[int]:
        """Map a row's one-hot codes to table indices (0 when unseen)."""
        out = []
        for f, code in enumerate(row.onehot):
            idx = self.vocabs[f].get(code, 0)
            if idx == 0:
                self.unknown_lookups += 1
            out.append(idx)
        return out

    def raw_values(self, row: ItemFeatureRow) -> list[float]:
        return list(row.numeric) + [float(v) for v in row.ordinal]


# ---------------------------------------------------------------------------
# sequences and splits
# ---------------------------------------------------------------------------

def build_sequences(records: list[ActionRecord], t_max: int) -> list[UserSequence]:
    """Group records by user and sort each user's actions by timestamp.

    The sort is stable, so simultaneous actions keep their input order.
    Sequences longer than ``t_max`` keep only the most recent ``t_max``
    actions. Users are returned in ascending id order.
    """
    if t_max < 1:
        raise ValueError("t_max must be >= 1")
    by_user: dict[str, list[ActionRecord]] = defaultdict(list)
    for r in records:
        by_user[r.user_id].append(r)
    sequences = []
    for user_id in sorted(by_user):
        actions = sorted(by_user[user_id], key=lambda r: r.timestamp)
        if len(actions) > t_max:
            actions = actions[-t_max:]
        sequences.append(UserSequence(user_id, actions))
    return sequences


def filter_min_count(records: list[ActionRecord], min_count: int) -> list[ActionRecord]:
    """Drop records of users/items with fewer than ``min_count`` clicks.

    Counts are taken once over the input (not re-iterated after dropping).
    """
    if min_count <= 1:
        return list(records)
    user_clicks: dict[str, int] = defaultdict(int)
    item_clicks: dict[str, int] = defaultdict(int)
    for r in records:
        if r.behavior == BehaviorType.CLICK:
            user_clicks[r.user_id] += 1
            item_clicks[r.item_id] += 1
    return [
        r
        for r in records
        if user_clicks[r.user_id] >= min_count and item_clicks[r.item_id] >= min_count
    ]


def _case_from_sequence(seq: UserSequence, holdout_fraction: float) -> EvalCase | None:
    """Split one sequence into history head and clicked-target tail."""
    t = len(seq.actions)
    if t < 2:
        return None
    head = max(1, int(round((1.0 - holdout_fraction) * t)))
    head = min(head, t - 1)
    tail = seq.actions[head:]
    targets = []
    for r in tail:
        if r.behavior == BehaviorType.CLICK and r.item_id not in targets:
            targets.append(r.item_id)
    if not targets:
        return None
    return EvalCase(seq.user_id, list(seq.actions[:head]), targets)


def split_dataset(
    sequences: list[UserSequence],
    mode: str = "by_user",
    *,
    fractions: tuple[float, float, float] = (0.8, 0.1, 0.1),
    boundary: int | None = None,
    validation_boundary: int | None = None,
    holdout_fraction: float = 0.2,
    seed: int = 0,
) -> DatasetSplit:
    """Partition sequences for training and evaluation.

    ``by_user`` assigns whole users to train/validation/test by a seeded
    shuffle; held-out users contribute their history head as model input and
    the clicked items of the tail as targets. ``by_time`` trains on actions
    before ``boundary`` and evaluates on post-boundary clicks of users with
    pre-boundary history (optionally carving validation targets out of
    [validation_boundary, boundary)).
    """
    if mode == "by_user":
        if not math.isclose(sum(fractions), 1.0, rel_tol=0, abs_tol=1e-9):
            raise ValueError(f"fractions must sum to 1, got {fractions}")
        users = sorted(s.user_id for s in sequences)
        rng = np.random.default_rng(seed)
        order = rng.permutation(len(users))
        shuffled = [users[i] for i in order]
        n = len(users)
        cut1 = int(math.floor(n * fractions[0]))
        cut2 = int(math.floor(n * (fractions[0] + fractions[1])))
        train_users = set(shuffled[:cut1])
        val_users = set(shuffled[cut1:cut2])
        by_id = {s.user_id: s for s in sequences}
        train = [by_id[u] for u in sorted(train_users)]
        validation = []
        for u in sorted(val_users):
            case = _case_from_sequence(by_id[u], holdout_fraction)
            if case is not None:
                validation.append(case)
        test = []
        for u in sorted(set(shuffled[cut2:])):
            case = _case_from_sequence(by_id[u], holdout_fraction)
            if case is not None:
                test.append(case)
    elif mode == "by_time":
        if boundary is None:
            raise ValueError("by_time split requires a boundary timestamp")
        train = []
        test = []
        validation = []
        for seq in sequences:
            pre = [r for r in seq.actions if r.timestamp < boundary]
            post = [r for r in seq.actions if r.timestamp >= boundary]
            train_part = pre
            if validation_boundary is not None:
                if not validation_boundary < boundary:
                    raise ValueError("validation_boundary must precede boundary")
                train_part = [r for r in pre if r.timestamp < validation_boundary]
                val_part = [r for r in pre if r.timestamp >= validation_boundary]
                val_targets = _distinct_clicks(val_part)
                if train_part and val_targets:
                    validation.append(EvalCase(seq.user_id, list(train_part), val_targets))
            if train_part:
                train.append(UserSequence(seq.user_id, list(train_part)))
            targets = _distinct_clicks(post)
            if pre and targets:
                test.append(EvalCase(seq.user_id, list(pre), targets))
    else:
        raise ValueError(f"unknown split mode {mode!r}")

    if not train:
        raise ValueError("split produced an empty train partition")
    if not test:
        raise ValueError("split produced an empty test partition")
    return DatasetSplit(train=train, validation=validation, test=test)


def _distinct_clicks(records: list[ActionRecord]) -> list[str]:
    out: list[str] = []
    for r in records:
        if r.behavior == BehaviorType.CLICK and r.item_id not in out:
            out.append(r.item_id)
    return out
