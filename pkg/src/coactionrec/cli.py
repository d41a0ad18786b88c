"""Command-line interface.

Every subcommand builds the same request model the HTTP service accepts and
either executes it in-process (default) or POSTs it to a running service via
--server. Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import sys

import httpx

from .service import ops
from .service.schemas import (AblateRequest, AblateResponse, BuildIndexRequest,
                              BuildIndexResponse, EvalRequest, EvalResponse,
                              GenSynthRequest, GenSynthResponse,
                              GradCheckRequest, GradCheckResponse,
                              RecommendRequest, RecommendResponse, SplitParams,
                              TrainRequest, TrainResponse)

USAGE_EXIT = 1
RUNTIME_EXIT = 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the CLI contract wants 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x]


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x]


def _str_list(text: str) -> list[str]:
    return [x for x in text.split(",") if x]


def _add_split_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--split", default="by_user", choices=["by_user", "by_time"])
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--validation-fraction", type=float, default=0.1)
    p.add_argument("--boundary", type=int, default=None)
    p.add_argument("--validation-boundary", type=int, default=None)
    p.add_argument("--holdout-fraction", type=float, default=0.2)
    p.add_argument("--min-count", type=int, default=1)


def _split_params(args) -> SplitParams:
    return SplitParams(
        mode=args.split, train_fraction=args.train_fraction,
        validation_fraction=args.validation_fraction, boundary=args.boundary,
        validation_boundary=args.validation_boundary,
        holdout_fraction=args.holdout_fraction, min_count=args.min_count)


def build_parser() -> _Parser:
    parser = _Parser(prog="coactionrec")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--server", default=None,
                       help="base URL of a running service; default runs in-process")
        return p

    p = add("gen-synth", "generate a synthetic interaction corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--users", type=int, default=100)
    p.add_argument("--items", type=int, default=500)
    p.add_argument("--categories", type=int, default=10)
    p.add_argument("--sellers", type=int, default=20)
    p.add_argument("--min-len", type=int, default=8)
    p.add_argument("--max-len", type=int, default=24)
    p.add_argument("--repeated-view-rate", type=float, default=0.3)
    p.add_argument("--complementary-purchase-rate", type=float, default=0.3)
    p.add_argument("--preferred-categories", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)

    p = add("train", "train a model on a corpus directory")
    p.add_argument("--config", default=None)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    _add_split_flags(p)
    for toggle in ("co-click", "co-purchase", "coaction", "edge-feats", "seq-graph"):
        p.add_argument(f"--drop-{toggle}", action="store_true")

    p = add("build-index", "build a KNN index over the item vectors")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--backend", default="hnsw", choices=["exact", "hnsw"])
    p.add_argument("--m", type=int, default=16)
    p.add_argument("--ef-construction", type=int, default=100)
    p.add_argument("--ef-search", type=int, default=64)
    p.add_argument("--seed", type=int, default=None)

    p = add("recommend", "top-N recommendations for one user")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--user", required=True)
    p.add_argument("--top-n", type=int, default=20)
    p.add_argument("--n-per-interest", type=int, default=50)
    p.add_argument("--index", default=None)
    p.add_argument("--seed", type=int, default=None)

    p = add("eval", "evaluate a model on a held-out partition")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--k", type=_int_list, default=[20, 50])
    p.add_argument("--backend", default="exact", choices=["exact", "hnsw"])
    p.add_argument("--partition", default="test", choices=["test", "validation"])
    p.add_argument("--n-per-interest", type=int, default=50)
    p.add_argument("--index", default=None)
    p.add_argument("--out", default=None, help="write machine-readable report here")
    p.add_argument("--export-users", default=None)
    p.add_argument("--seed", type=int, default=None)
    _add_split_flags(p)

    p = add("ablate", "train and evaluate component-drop variants")
    p.add_argument("--data", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--variants", type=_str_list, default=None)
    p.add_argument("--lambdas", type=_float_list, default=None)
    p.add_argument("--k", type=_int_list, default=[20, 50])
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    _add_split_flags(p)

    p = add("grad-check", "verify analytic gradients with finite differences")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--step", type=float, default=1e-4)
    p.add_argument("--tolerance", type=float, default=1e-4)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    return parser


def _dispatch(server: str | None, path: str, request, response_type, local_fn):
    if server is None:
        return local_fn(request)
    url = server.rstrip("/") + path
    resp = httpx.post(url, json=request.model_dump(mode="json"), timeout=None)
    if resp.status_code in (400, 422):
        raise _UsageError(_detail(resp))
    if resp.status_code >= 300:
        raise RuntimeError(_detail(resp))
    return response_type.model_validate(resp.json())


def _detail(resp) -> str:
    try:
        return str(resp.json().get("detail", resp.text))
    except Exception:
        return resp.text


def _cmd_gen_synth(args) -> int:
    req = GenSynthRequest(
        out_dir=args.out, users=args.users, items=args.items,
        categories=args.categories, sellers=args.sellers,
        min_len=args.min_len, max_len=args.max_len,
        repeated_view_rate=args.repeated_view_rate,
        complementary_purchase_rate=args.complementary_purchase_rate,
        preferred_categories=args.preferred_categories, seed=args.seed)
    resp = _dispatch(args.server, "/gen-synth", req, GenSynthResponse,
                     ops.run_gen_synth)
    print(resp.interactions_path)
    print(resp.features_path)
    print(f"users={resp.n_users} items={resp.n_items} records={resp.n_records}")
    return 0


def _cmd_train(args) -> int:
    req = TrainRequest(
        data_dir=args.data, out_dir=args.out, config_path=args.config,
        seed=args.seed, epochs=args.epochs, split=_split_params(args),
        drop_co_click=args.drop_co_click,
        drop_co_purchase=args.drop_co_purchase,
        drop_coaction=args.drop_coaction,
        drop_edge_feats=args.drop_edge_feats,
        drop_seq_graph=args.drop_seq_graph)
    resp = _dispatch(args.server, "/train", req, TrainResponse, ops.run_train)
    print(f"model: {resp.model_dir}")
    print(f"fingerprint: {resp.fingerprint}")
    print(f"epochs={resp.epochs} examples={resp.n_examples}")
    print(f"loss: first={resp.first_epoch_loss:.6f} final={resp.final_epoch_loss:.6f}")
    return 0


def _cmd_build_index(args) -> int:
    req = BuildIndexRequest(
        model_dir=args.model, data_dir=args.data, out_path=args.out,
        backend=args.backend, m=args.m, ef_construction=args.ef_construction,
        ef_search=args.ef_search, seed=args.seed)
    resp = _dispatch(args.server, "/build-index", req, BuildIndexResponse,
                     ops.run_build_index)
    print(f"index: {resp.path} backend={resp.backend} items={resp.n_items}")
    return 0


def _cmd_recommend(args) -> int:
    req = RecommendRequest(
        model_dir=args.model, data_dir=args.data, user_id=args.user,
        top_n=args.top_n, n_per_interest=args.n_per_interest,
        index_path=args.index, seed=args.seed)
    resp = _dispatch(args.server, "/recommend", req, RecommendResponse,
                     ops.run_recommend)
    sys.stdout.write(ops.format_recommendations(resp))
    return 0


def _cmd_eval(args) -> int:
    req = EvalRequest(
        model_dir=args.model, data_dir=args.data, ks=args.k,
        backend=args.backend, partition=args.partition,
        n_per_interest=args.n_per_interest, index_path=args.index,
        split=_split_params(args), out_path=args.out,
        export_users_path=args.export_users, seed=args.seed)
    resp = _dispatch(args.server, "/eval", req, EvalResponse, ops.run_eval)
    sys.stdout.write(resp.text)
    return 0


def _cmd_ablate(args) -> int:
    req = AblateRequest(
        data_dir=args.data, config_path=args.config, variants=args.variants,
        lambdas=args.lambdas, ks=args.k, seed=args.seed, epochs=args.epochs,
        split=_split_params(args))
    resp = _dispatch(args.server, "/ablate", req, AblateResponse, ops.run_ablate)
    for name in resp.reports:
        print(f"[{name}]")
        sys.stdout.write(resp.reports[name].text)
        print()
    return 0


def _cmd_grad_check(args) -> int:
    req = GradCheckRequest(seed=args.seed, step=args.step,
                           tolerance=args.tolerance)
    resp = _dispatch(args.server, "/grad-check", req, GradCheckResponse,
                     ops.run_gradcheck_op)
    for t in resp.tensors:
        print(f"{t.name}\t{t.max_rel_err:.3e}")
    print(f"max_rel_err={resp.max_rel_err:.3e} tolerance={resp.tolerance:g}")
    print("PASS" if resp.passed else "FAIL")
    return 0 if resp.passed else RUNTIME_EXIT


def _cmd_serve(args) -> int:
    import uvicorn
    from .service.app import app
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


_HANDLERS = {
    "gen-synth": _cmd_gen_synth,
    "train": _cmd_train,
    "build-index": _cmd_build_index,
    "recommend": _cmd_recommend,
    "eval": _cmd_eval,
    "ablate": _cmd_ablate,
    "grad-check": _cmd_grad_check,
    "serve": _cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _HANDLERS[args.command](args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except ValueError as exc:  # includes pydantic validation errors
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except FileNotFoundError as exc:
        print(f"error: missing input file: {exc}", file=sys.stderr)
        return RUNTIME_EXIT
    except httpx.HTTPError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_EXIT
    except SystemExit:
        raise
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_EXIT


if __name__ == "__main__":
    sys.exit(main())
