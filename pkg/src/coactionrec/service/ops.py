"""Operation functions behind both the HTTP endpoints and the CLI.

Each function validates inputs, does the work, and returns a response model.
Errors surface as ValueError (bad request) or FileNotFoundError (missing
input); callers translate them to HTTP statuses or exit codes.
"""

from __future__ import annotations

import os

from .. import __version__
from ..config import AblationToggles, TrainConfig, load_config
from ..datamodel import (FeatureStore, build_sequences, filter_min_count,
                         load_interactions, load_item_features, split_dataset)
from ..embedding import export_embeddings, format_vector
from ..evalharness import (ABLATION_VARIANTS, ablation_run, dump_report,
                           evaluate, format_report)
from ..gradcheck import run_grad_check
from ..model import CoActionModel, load_model, save_model
from ..retrieval import (batch_item_inference, batch_user_inference,
                         build_index, export_user_embeddings, load_index,
                         recommend, save_index)
from ..synth import SynthConfig, generate_synthetic
from ..training import format_history, train
from .schemas import (AblateRequest, AblateResponse, BuildIndexRequest,
                      BuildIndexResponse, EvalRequest, EvalResponse,
                      GenSynthRequest, GenSynthResponse, GradCheckRequest,
                      GradCheckResponse, HealthResponse, RecommendRequest,
                      RecommendResponse, RecommendedItem, SplitParams,
                      TensorReport, TrainRequest, TrainResponse)


def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__)


def run_gen_synth(req: GenSynthRequest) -> GenSynthResponse:
    cfg = SynthConfig(
        users=req.users, items=req.items, categories=req.categories,
        sellers=req.sellers, min_len=req.min_len, max_len=req.max_len,
        repeated_view_rate=req.repeated_view_rate,
        complementary_purchase_rate=req.complementary_purchase_rate,
        preferred_categories=req.preferred_categories)
    interactions, features = generate_synthetic(cfg, req.seed, req.out_dir)
    records = load_interactions(interactions)
    return GenSynthResponse(
        interactions_path=interactions, features_path=features,
        n_users=len({r.user_id for r in records}), n_items=req.items,
        n_records=len(records))


def _require(path: str) -> str:
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    return path


def _load_corpus(data_dir: str, t_max: int, min_count: int = 1):
    records = load_interactions(_require(os.path.join(data_dir, "interactions.tsv")))
    rows = load_item_features(_require(os.path.join(data_dir, "item_features.tsv")))
    store = FeatureStore(rows)
    records = filter_min_count(records, min_count)
    sequences = build_sequences(records, t_max)
    return store, sequences


def _make_split(sequences, params: SplitParams, seed: int):
    val = params.validation_fraction
    test = max(0.0, 1.0 - params.train_fraction - val)
    return split_dataset(
        sequences, params.mode,
        fractions=(params.train_fraction, val, test),
        boundary=params.boundary,
        validation_boundary=params.validation_boundary,
        holdout_fraction=params.holdout_fraction,
        seed=seed)


def _train_config(req) -> TrainConfig:
    cfg = load_config(req.config_path) if req.config_path else TrainConfig()
    if req.seed is not None:
        cfg.seed = req.seed
    if getattr(req, "epochs", None) is not None:
        cfg.epochs = req.epochs
    cfg.validate()
    return cfg


def run_train(req: TrainRequest) -> TrainResponse:
    cfg = _train_config(req)
    store, sequences = _load_corpus(req.data_dir, cfg.t_max, req.split.min_count)
    split = _make_split(sequences, req.split, cfg.seed)
    toggles = AblationToggles(
        drop_co_click=req.drop_co_click,
        drop_co_purchase=req.drop_co_purchase,
        drop_coaction=req.drop_coaction,
        drop_edge_feats=req.drop_edge_feats,
        drop_seq_graph=req.drop_seq_graph)

    result = train(store, split, cfg, toggles)

    os.makedirs(req.out_dir, exist_ok=True)
    fingerprint = save_model(result.model, req.out_dir)
    with open(os.path.join(req.out_dir, "metrics.log"), "w", encoding="utf-8",
              newline="\n") as fh:
        fh.write(format_history(result.history))
    ids, vectors = batch_item_inference(result.model)
    export_embeddings(ids, vectors, os.path.join(req.out_dir, "item_vectors.tsv"))

    return TrainResponse(
        model_dir=req.out_dir, fingerprint=fingerprint, epochs=cfg.epochs,
        n_examples=result.n_examples,
        first_epoch_loss=result.history[0][1],
        final_epoch_loss=result.history[-1][1])


def _load_model_with_corpus(model_dir: str, data_dir: str, min_count: int = 1):
    _require(os.path.join(model_dir, "config.txt"))
    cfg = load_config(os.path.join(model_dir, "config.txt"), extended=True)
    store, sequences = _load_corpus(data_dir, cfg.t_max, min_count)
    model = load_model(model_dir, store)
    return model, store, sequences


def run_build_index(req: BuildIndexRequest) -> BuildIndexResponse:
    model, _, _ = _load_model_with_corpus(req.model_dir, req.data_dir)
    ids, vectors = batch_item_inference(model)
    seed = req.seed if req.seed is not None else model.cfg.seed
    index = build_index(ids, vectors, backend=req.backend, m=req.m,
                        ef_construction=req.ef_construction,
                        ef_search=req.ef_search, seed=seed)
    out_dir = os.path.dirname(os.path.abspath(req.out_path))
    os.makedirs(out_dir, exist_ok=True)
    save_index(index, req.out_path)
    return BuildIndexResponse(path=req.out_path, backend=req.backend,
                              n_items=len(ids))


def run_recommend(req: RecommendRequest) -> RecommendResponse:
    model, _, sequences = _load_model_with_corpus(req.model_dir, req.data_dir)
    by_user = {s.user_id: s for s in sequences}
    if req.user_id not in by_user:
        raise ValueError(f"unknown user {req.user_id!r}")
    if req.index_path is not None:
        index = load_index(_require(req.index_path))
    else:
        ids, vectors = batch_item_inference(model)
        index = build_index(ids, vectors, backend="exact")
    interests = batch_user_inference(model, [by_user[req.user_id]])[req.user_id]
    ranked = recommend(interests, index, top_n=req.top_n,
                       n_per_interest=max(req.n_per_interest, req.top_n))
    items = [RecommendedItem(rank=r, item_id=item, score=score)
             for r, (item, score) in enumerate(ranked, start=1)]
    return RecommendResponse(user_id=req.user_id, items=items)


def format_recommendations(resp: RecommendResponse) -> str:
    """`user_id<TAB>rank<TAB>item_id<TAB>score` rows."""
    return "".join(
        f"{resp.user_id}\t{it.rank}\t{it.item_id}\t{format_vector([it.score])}\n"
        for it in resp.items)


def run_eval(req: EvalRequest) -> EvalResponse:
    model, _, sequences = _load_model_with_corpus(
        req.model_dir, req.data_dir, req.split.min_count)
    split = _make_split(sequences, req.split, model.cfg.seed)
    if req.partition == "test":
        cases = split.test
    elif req.partition == "validation":
        cases = split.validation
    else:
        raise ValueError(f"unknown partition {req.partition!r}")
    if not cases:
        raise ValueError(f"partition {req.partition!r} is empty")

    index = load_index(_require(req.index_path)) if req.index_path else None
    report = evaluate(model, cases, ks=req.ks, backend=req.backend,
                      n_per_interest=req.n_per_interest, index=index)
    text = format_report(report)
    dump = dump_report(report)
    if req.out_path:
        with open(req.out_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(dump)
    if req.export_users_path:
        histories = [s for s in sequences if s.user_id in {c.user_id for c in cases}]
        export_user_embeddings(batch_user_inference(model, histories),
                               req.export_users_path)
    return EvalResponse(values=report.values,
                        users_evaluated=report.users_evaluated,
                        users_skipped=report.users_skipped,
                        fingerprint=report.fingerprint, text=text, dump=dump)


def run_ablate(req: AblateRequest) -> AblateResponse:
    cfg = _train_config(req)
    store, sequences = _load_corpus(req.data_dir, cfg.t_max, req.split.min_count)
    split = _make_split(sequences, req.split, cfg.seed)
    names = req.variants if req.variants is not None else list(ABLATION_VARIANTS)
    unknown = [n for n in names if n not in ABLATION_VARIANTS]
    if unknown:
        raise ValueError(f"unknown ablation variants: {unknown}; "
                         f"known: {sorted(ABLATION_VARIANTS)}")
    variants = {n: ABLATION_VARIANTS[n] for n in names}
    reports = ablation_run(store, split, cfg, variants=variants,
                           lambdas=req.lambdas, ks=req.ks)
    out = {}
    for name, report in reports.items():
        out[name] = EvalResponse(
            values=report.values, users_evaluated=report.users_evaluated,
            users_skipped=report.users_skipped, fingerprint=report.fingerprint,
            text=format_report(report), dump=dump_report(report))
    return AblateResponse(reports=out)


def run_gradcheck_op(req: GradCheckRequest) -> GradCheckResponse:
    result = run_grad_check(seed=req.seed, step=req.step, tolerance=req.tolerance)
    return GradCheckResponse(
        seed=result["seed"], step=result["step"], tolerance=result["tolerance"],
        tensors=[TensorReport(**t) for t in result["tensors"]],
        max_rel_err=result["max_rel_err"], passed=result["passed"])
