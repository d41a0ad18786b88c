"""Offline top-K evaluation and ablation driver.

Metrics are means over evaluated users; users without any usable target item
are skipped and counted. Evaluation defaults to the exact index backend so a
metric change is attributable to the model rather than the index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .config import AblationToggles, TrainConfig, config_fingerprint
from .datamodel import DatasetSplit, EvalCase, FeatureStore, UserSequence
from .model import CoActionModel
from .retrieval import batch_item_inference, build_index, recommend
from .training import train

__all__ = ["recall_at_k", "ndcg_at_k", "hitrate_at_k", "MetricReport",
           "evaluate", "ablation_run", "ABLATION_VARIANTS",
           "format_report", "dump_report"]


def recall_at_k(retrieved, relevant, k: int) -> float:
    """|top-k intersect relevant| / |relevant|."""
    rel = set(relevant)
    if not rel:
        raise ValueError("relevant set is empty")
    hits = sum(1 for item in retrieved[:k] if item in rel)
    return hits / len(rel)


def ndcg_at_k(retrieved, relevant, k: int) -> float:
    """Binary-relevance NDCG: DCG over hit ranks / ideal DCG."""
    rel = set(relevant)
    if not rel:
        raise ValueError("relevant set is empty")
    dcg = 0.0
    for rank, item in enumerate(retrieved[:k], start=1):
        if item in rel:
            dcg += 1.0 / math.log2(rank + 1)
    ideal = sum(1.0 / math.log2(r + 1) for r in range(1, min(k, len(rel)) + 1))
    return dcg / ideal


def hitrate_at_k(retrieved, relevant, k: int) -> float:
    rel = set(relevant)
    if not rel:
        raise ValueError("relevant set is empty")
    return 1.0 if any(item in rel for item in retrieved[:k]) else 0.0


_METRICS = (("recall", recall_at_k), ("ndcg", ndcg_at_k), ("hitrate", hitrate_at_k))


@dataclass
class MetricReport:
    """Mean metric values keyed ``metric@k``, plus coverage counters."""

    values: dict[str, float] = field(default_factory=dict)
    users_evaluated: int = 0
    users_skipped: int = 0
    fingerprint: str = ""


def evaluate(model: CoActionModel, cases: list[EvalCase],
             ks=(20, 50), backend: str = "exact",
             n_per_interest: int = 50, index=None) -> MetricReport:
    """Score held-out users: relevant = target items, retrieved = recommend().

    Targets without feature rows cannot appear in the index and are dropped
    from the relevant set; users left with no targets (or no usable history)
    are skipped and counted.
    """
    ks = sorted(set(int(k) for k in ks))
    if not ks:
        raise ValueError("need at least one k")
    if index is None:
        ids, vectors = batch_item_inference(model)
        index = build_index(ids, vectors, backend=backend, seed=model.cfg.seed)
    top_n = max(ks)
    fan_out = max(n_per_interest, top_n)

    sums = {f"{name}@{k}": 0.0 for name, _ in _METRICS for k in ks}
    evaluated = 0
    skipped = 0
    for case in cases:
        relevant = [t for t in case.targets if model.store.has_item(t)]
        history = [a for a in case.history if model.store.has_item(a.item_id)]
        if not relevant or not history:
            skipped += 1
            continue
        interests = model.user_interests(
            UserSequence(case.user_id, history)).detach().numpy()
        ranked = recommend(interests, index, top_n=top_n, n_per_interest=fan_out)
        retrieved = [item for item, _ in ranked]
        for name, fn in _METRICS:
            for k in ks:
                sums[f"{name}@{k}"] += fn(retrieved, relevant, k)
        evaluated += 1

    values = {key: (sums[key] / evaluated if evaluated else 0.0) for key in sums}
    return MetricReport(values=values, users_evaluated=evaluated,
                        users_skipped=skipped,
                        fingerprint=config_fingerprint(model.cfg))


ABLATION_VARIANTS: dict[str, AblationToggles] = {
    "full": AblationToggles(),
    "no_co_click": AblationToggles(drop_co_click=True),
    "no_co_purchase": AblationToggles(drop_co_purchase=True),
    "no_coaction": AblationToggles(drop_coaction=True),
    "no_edge_feats": AblationToggles(drop_edge_feats=True),
    "no_seq_graph": AblationToggles(drop_seq_graph=True),
}


def ablation_run(store: FeatureStore, split: DatasetSplit, cfg: TrainConfig,
                 variants: dict[str, AblationToggles] | None = None,
                 lambdas: list[float] | None = None,
                 ks=(20, 50), log_cb=None) -> dict[str, MetricReport]:
    """Train and evaluate one model per variant (same config and seed).

    ``variants`` maps names to component toggles (defaults to the full model
    plus one variant per dropped component); ``lambdas`` adds an aux-weight
    sweep on top of the full model.
    """
    runs: list[tuple[str, AblationToggles, TrainConfig]] = []
    chosen = ABLATION_VARIANTS if variants is None else variants
    for name, toggles in chosen.items():
        runs.append((name, toggles, cfg))
    for lam in lambdas or []:
        cfg_l = TrainConfig(**{**cfg.__dict__, "aux_weight": lam})
        runs.append((f"lambda={lam:g}", AblationToggles(), cfg_l))

    reports: dict[str, MetricReport] = {}
    for name, toggles, run_cfg in runs:
        result = train(store, split, run_cfg, toggles)
        reports[name] = evaluate(result.model, split.test, ks=ks)
        if log_cb is not None:
            log_cb(name, reports[name])
    return reports


def format_report(report: MetricReport) -> str:
    """Human-readable table, one row per metric@k."""
    lines = [f"{'metric':<12}{'value':>12}"]
    for key in sorted(report.values):
        lines.append(f"{key:<12}{report.values[key]:>12.6f}")
    lines.append(f"users evaluated: {report.users_evaluated}")
    lines.append(f"users skipped:   {report.users_skipped}")
    lines.append(f"fingerprint:     {report.fingerprint}")
    return "\n".join(lines) + "\n"


def dump_report(report: MetricReport) -> str:
    """Machine-readable key=value dump (full float precision)."""
    lines = [f"users_evaluated={report.users_evaluated}",
             f"users_skipped={report.users_skipped}",
             f"fingerprint={report.fingerprint}"]
    for key in sorted(report.values):
        lines.append(f"{key}={report.values[key]!r}")
    return "\n".join(lines) + "\n"
