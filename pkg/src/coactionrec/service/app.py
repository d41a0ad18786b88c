"""FastAPI application exposing the pipeline operations.

Paths in requests are interpreted on the machine running the service. Bad
inputs map to 400, missing files to 404 with the path in the detail.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from . import ops
from .schemas import (AblateRequest, AblateResponse, BuildIndexRequest,
                      BuildIndexResponse, EvalRequest, EvalResponse,
                      GenSynthRequest, GenSynthResponse, GradCheckRequest,
                      GradCheckResponse, HealthResponse, RecommendRequest,
                      RecommendResponse, TrainRequest, TrainResponse)


def create_app() -> FastAPI:
    app = FastAPI(title="coactionrec", version=ops.health().version)

    @app.exception_handler(ValueError)
    def _value_error(_request: Request, exc: ValueError) -> JSONResponse:
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.exception_handler(FileNotFoundError)
    def _not_found(_request: Request, exc: FileNotFoundError) -> JSONResponse:
        return JSONResponse(status_code=404, content={"detail": str(exc)})

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return ops.health()

    @app.post("/gen-synth", response_model=GenSynthResponse)
    def gen_synth(req: GenSynthRequest) -> GenSynthResponse:
        return ops.run_gen_synth(req)

    @app.post("/train", response_model=TrainResponse)
    def train(req: TrainRequest) -> TrainResponse:
        return ops.run_train(req)

    @app.post("/build-index", response_model=BuildIndexResponse)
    def build_index(req: BuildIndexRequest) -> BuildIndexResponse:
        return ops.run_build_index(req)

    @app.post("/recommend", response_model=RecommendResponse)
    def recommend(req: RecommendRequest) -> RecommendResponse:
        return ops.run_recommend(req)

    @app.post("/eval", response_model=EvalResponse)
    def eval_(req: EvalRequest) -> EvalResponse:
        return ops.run_eval(req)

    @app.post("/ablate", response_model=AblateResponse)
    def ablate(req: AblateRequest) -> AblateResponse:
        return ops.run_ablate(req)

    @app.post("/grad-check", response_model=GradCheckResponse)
    def grad_check(req: GradCheckRequest) -> GradCheckResponse:
        return ops.run_gradcheck_op(req)

    return app


app = create_app()
