"""Versioned JSON-over-HTTP protocol for model inference.

Contract items enforced here rather than in backends:
- every response carries "v" and the serving model's id;
- /embed vectors match the declared dimension;
- /embed_sparse never returns more than 256 terms per text;
- /rerank returns exactly one score per passage;
- a model that fails to load yields a structured 503 naming the model.

Bit-exactness across calls is not promised for real models; the builtin
backend is deterministic.
"""

from __future__ import annotations

from typing import Dict, List

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .backends import Backend, ModelUnavailable

PROTOCOL_VERSION = 1

SPARSE_MAX_TERMS = 256


class EmbedRequest(BaseModel):
    v: int
    texts: List[str]
    prefix: str = ""


class EmbedResponse(BaseModel):
    v: int
    model_id: str
    dim: int
    vectors: List[List[float]]


class EmbedSparseRequest(BaseModel):
    v: int
    texts: List[str]


class EmbedSparseResponse(BaseModel):
    v: int
    model_id: str
    vectors: List[Dict[str, float]]


class RerankRequest(BaseModel):
    v: int
    query: str
    passages: List[str]


class RerankResponse(BaseModel):
    v: int
    model_id: str
    scores: List[float]


class GenerateRequest(BaseModel):
    v: int
    prompt: str
    temperature: float = Field(0.0, ge=0.0)
    max_tokens: int = Field(512, gt=0)


class GenerateResponse(BaseModel):
    v: int
    model_id: str
    text: str


def _check_version(v: int) -> None:
    if v != PROTOCOL_VERSION:
        raise HTTPException(
            status_code=400,
            detail=f"unsupported protocol version {v}, expected {PROTOCOL_VERSION}",
        )


def create_app(backend: Backend) -> FastAPI:
    app = FastAPI(title="pagerag-bridge")

    @app.exception_handler(ModelUnavailable)
    async def _model_unavailable(request, exc: ModelUnavailable):
        from fastapi.responses import JSONResponse

        return JSONResponse(
            status_code=503,
            content={"v": PROTOCOL_VERSION, "error": "model unavailable", "model_id": exc.model_id},
        )

    @app.get("/health")
    def health() -> dict:
        return {
            "v": PROTOCOL_VERSION,
            "status": "ok",
            "dim": backend.dim,
            "models": backend.model_ids(),
        }

    @app.post("/embed", response_model=EmbedResponse)
    def embed(req: EmbedRequest) -> EmbedResponse:
        _check_version(req.v)
        vectors = backend.embed(req.texts, prefix=req.prefix)
        if vectors.shape != (len(req.texts), backend.dim):
            raise HTTPException(status_code=500, detail="backend returned wrong shape")
        return EmbedResponse(
            v=PROTOCOL_VERSION,
            model_id=backend.model_ids()["embedder"],
            dim=backend.dim,
            vectors=[[float(x) for x in row] for row in vectors],
        )

    @app.post("/embed_sparse", response_model=EmbedSparseResponse)
    def embed_sparse(req: EmbedSparseRequest) -> EmbedSparseResponse:
        _check_version(req.v)
        vectors = backend.embed_sparse(req.texts)
        if len(vectors) != len(req.texts):
            raise HTTPException(status_code=500, detail="backend arity mismatch")
        capped = [
            dict(sorted(vec.items(), key=lambda kv: (-kv[1], kv[0]))[:SPARSE_MAX_TERMS])
            for vec in vectors
        ]
        return EmbedSparseResponse(
            v=PROTOCOL_VERSION,
            model_id=backend.model_ids()["sparse_encoder"],
            vectors=capped,
        )

    @app.post("/rerank", response_model=RerankResponse)
    def rerank(req: RerankRequest) -> RerankResponse:
        _check_version(req.v)
        scores = backend.rerank(req.query, req.passages)
        if len(scores) != len(req.passages):
            raise HTTPException(status_code=500, detail="backend arity mismatch")
        return RerankResponse(
            v=PROTOCOL_VERSION,
            model_id=backend.model_ids()["reranker"],
            scores=[float(s) for s in scores],
        )

    @app.post("/generate", response_model=GenerateResponse)
    def generate(req: GenerateRequest) -> GenerateResponse:
        _check_version(req.v)
        text = backend.generate(req.prompt, req.temperature, req.max_tokens)
        return GenerateResponse(
            v=PROTOCOL_VERSION,
            model_id=backend.model_ids()["generator"],
            text=text,
        )

    return app
