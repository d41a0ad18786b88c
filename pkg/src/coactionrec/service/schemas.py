"""Request/response models shared by the HTTP service and the CLI."""

from __future__ import annotations

from pydantic import BaseModel, Field


class GenSynthRequest(BaseModel):
    out_dir: str
    users: int = 100
    items: int = 500
    categories: int = 10
    sellers: int = 20
    min_len: int = 8
    max_len: int = 24
    repeated_view_rate: float = 0.3
    complementary_purchase_rate: float = 0.3
    preferred_categories: int = 2
    seed: int = 0


class GenSynthResponse(BaseModel):
    interactions_path: str
    features_path: str
    n_users: int
    n_items: int
    n_records: int


class SplitParams(BaseModel):
    mode: str = "by_user"
    train_fraction: float = 0.8
    validation_fraction: float = 0.1
    boundary: int | None = None
    validation_boundary: int | None = None
    holdout_fraction: float = 0.2
    min_count: int = 1


class TrainRequest(BaseModel):
    data_dir: str
    out_dir: str
    config_path: str | None = None
    seed: int | None = None          # overrides the config file seed
    epochs: int | None = None        # overrides the config file epochs
    split: SplitParams = Field(default_factory=SplitParams)
    drop_co_click: bool = False
    drop_co_purchase: bool = False
    drop_coaction: bool = False
    drop_edge_feats: bool = False
    drop_seq_graph: bool = False


class TrainResponse(BaseModel):
    model_dir: str
    fingerprint: str
    epochs: int
    n_examples: int
    first_epoch_loss: float
    final_epoch_loss: float


class BuildIndexRequest(BaseModel):
    model_dir: str
    data_dir: str
    out_path: str
    backend: str = "hnsw"
    m: int = 16
    ef_construction: int = 100
    ef_search: int = 64
    seed: int | None = None


class BuildIndexResponse(BaseModel):
    path: str
    backend: str
    n_items: int


class RecommendedItem(BaseModel):
    rank: int
    item_id: str
    score: float


class RecommendRequest(BaseModel):
    model_dir: str
    data_dir: str
    user_id: str
    top_n: int = 20
    n_per_interest: int = 50
    index_path: str | None = None    # default: exact scoring over the catalog
    seed: int | None = None


class RecommendResponse(BaseModel):
    user_id: str
    items: list[RecommendedItem]


class EvalRequest(BaseModel):
    model_dir: str
    data_dir: str
    ks: list[int] = [20, 50]
    backend: str = "exact"
    partition: str = "test"
    n_per_interest: int = 50
    index_path: str | None = None
    split: SplitParams = Field(default_factory=SplitParams)
    out_path: str | None = None          # machine-readable dump target
    export_users_path: str | None = None
    seed: int | None = None


class EvalResponse(BaseModel):
    values: dict[str, float]
    users_evaluated: int
    users_skipped: int
    fingerprint: str
    text: str
    dump: str


class AblateRequest(BaseModel):
    data_dir: str
    config_path: str | None = None
    variants: list[str] | None = None    # default: all known variants
    lambdas: list[float] | None = None
    ks: list[int] = [20, 50]
    seed: int | None = None
    epochs: int | None = None
    split: SplitParams = Field(default_factory=SplitParams)


class AblateResponse(BaseModel):
    reports: dict[str, EvalResponse]


class GradCheckRequest(BaseModel):
    seed: int = 0
    step: float = 1e-4
    tolerance: float = 1e-4


class TensorReport(BaseModel):
    name: str
    max_rel_err: float
    max_abs_err: float
    n_elements: int


class GradCheckResponse(BaseModel):
    seed: int
    step: float
    tolerance: float
    tensors: list[TensorReport]
    max_rel_err: float
    passed: bool


class HealthResponse(BaseModel):
    status: str
    version: str
