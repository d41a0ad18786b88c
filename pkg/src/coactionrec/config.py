"""Hyperparameter configuration and its key=value file format."""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass

__all__ = ["TrainConfig", "AblationToggles", "parse_config", "load_config",
           "serialize_config", "save_config", "config_fingerprint"]


@dataclass
class TrainConfig:
    dim: int = 32
    behavior_dim: int = 8
    layers: int = 2
    interests: int = 4
    aux_weight: float = 0.2      # file key: lambda
    negatives: int = 64
    lr: float = 1e-3
    epochs: int = 50
    batch: int = 32
    seed: int = 0
    neighbor_cap: int = 10
    t_max: int = 200
    optimizer: str = "adam"
    # structural knobs (persisted in model directories, not part of the
    # public config-file key set)
    feature_dim: int = 8
    attn_dim: int = 32
    pool_dim: int = 0            # 0 means 4 * dim
    shared_qkv: bool = False

    def resolved_pool_dim(self) -> int:
        return self.pool_dim if self.pool_dim > 0 else 4 * self.dim

    def validate(self) -> None:
        positive = ("dim", "behavior_dim", "layers", "interests", "negatives",
                    "epochs", "batch", "neighbor_cap", "t_max", "feature_dim",
                    "attn_dim")
        for name in positive:
            if getattr(self, name) < 1:
                raise ValueError(f"config: {name} must be >= 1")
        if self.aux_weight < 0:
            raise ValueError("config: lambda must be >= 0")
        if self.lr <= 0:
            raise ValueError("config: lr must be > 0")
        if self.seed < 0:
            raise ValueError("config: seed must be >= 0")
        if self.pool_dim < 0:
            raise ValueError("config: pool_dim must be >= 0")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"config: unknown optimizer {self.optimizer!r}")


@dataclass
class AblationToggles:
    """Switches that disable one model component each (all off = full model)."""

    drop_co_click: bool = False
    drop_co_purchase: bool = False
    drop_coaction: bool = False      # skip graph aggregation entirely: z = e
    drop_edge_feats: bool = False    # zero edge features in user attention
    drop_seq_graph: bool = False     # skip explicit interaction: H = node embs

    def any(self) -> bool:
        return any(dataclasses.asdict(self).values())


# file key <-> attribute name (identical except for the keyword "lambda")
_PUBLIC_KEYS = {
    "dim": "dim",
    "behavior_dim": "behavior_dim",
    "layers": "layers",
    "interests": "interests",
    "lambda": "aux_weight",
    "negatives": "negatives",
    "lr": "lr",
    "epochs": "epochs",
    "batch": "batch",
    "seed": "seed",
    "neighbor_cap": "neighbor_cap",
    "t_max": "t_max",
    "optimizer": "optimizer",
}
_EXTENDED_KEYS = dict(_PUBLIC_KEYS)
_EXTENDED_KEYS.update({
    "feature_dim": "feature_dim",
    "attn_dim": "attn_dim",
    "pool_dim": "pool_dim",
    "shared_qkv": "shared_qkv",
})

_FLOAT_FIELDS = {"aux_weight", "lr"}
_STR_FIELDS = {"optimizer"}
_BOOL_FIELDS = {"shared_qkv"}


def parse_config(text: str, *, source: str = "<config>", extended: bool = False) -> TrainConfig:
    """Parse ``key=value`` lines into a TrainConfig.

    Blank lines and ``#`` comments are allowed. Unknown keys, duplicate keys
    and unparseable values raise ValueError with the line number. ``extended``
    additionally accepts the structural keys written into model directories.
    """
    keymap = _EXTENDED_KEYS if extended else _PUBLIC_KEYS
    cfg = TrainConfig()
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{source}:{lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in keymap:
            raise ValueError(f"{source}:{lineno}: unknown config key {key!r}")
        if key in seen:
            raise ValueError(f"{source}:{lineno}: duplicate config key {key!r}")
        seen.add(key)
        attr = keymap[key]
        try:
            if attr in _STR_FIELDS:
                parsed: object = value
            elif attr in _BOOL_FIELDS:
                if value not in ("true", "false"):
                    raise ValueError
                parsed = value == "true"
            elif attr in _FLOAT_FIELDS:
                parsed = float(value)
            else:
                parsed = int(value)
        except ValueError:
            raise ValueError(f"{source}:{lineno}: bad value {value!r} for {key!r}") from None
        setattr(cfg, attr, parsed)
    cfg.validate()
    return cfg


def load_config(path: str, *, extended: bool = False) -> TrainConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read(), source=path, extended=extended)


def _format_value(attr: str, value: object) -> str:
    if attr in _BOOL_FIELDS:
        return "true" if value else "false"
    if attr in _FLOAT_FIELDS:
        return repr(float(value))
    return str(value)


def serialize_config(cfg: TrainConfig, *, extended: bool = True) -> str:
    """Render a config as key=value lines in a fixed key order."""
    keymap = _EXTENDED_KEYS if extended else _PUBLIC_KEYS
    lines = []
    for key in keymap:  # insertion order is the canonical order
        attr = keymap[key]
        lines.append(f"{key}={_format_value(attr, getattr(cfg, attr))}")
    return "\n".join(lines) + "\n"


def save_config(cfg: TrainConfig, path: str, *, extended: bool = True) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize_config(cfg, extended=extended))


def config_fingerprint(cfg: TrainConfig) -> str:
    """Stable hash of the fully resolved configuration."""
    return hashlib.sha256(serialize_config(cfg, extended=True).encode("utf-8")).hexdigest()
