"""Command-line entrypoint: `pagerag-bridge --backend builtin --port 8811`."""

from __future__ import annotations

import argparse
from typing import List, Optional

from .app import create_app
from .backends import BuiltinBackend, TransformersBackend


def build_app(args) -> "FastAPI":  # noqa: F821 - for uvicorn factory use
    if args.backend == "builtin":
        backend = BuiltinBackend(dim=args.dim)
    else:
        backend = TransformersBackend(
            embedder_model=args.embedder_model,
            sparse_model=args.sparse_model,
            reranker_model=args.reranker_model,
            generator_model=args.generator_model,
            dim=args.dim,
        )
    return create_app(backend)


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="pagerag-bridge")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8811)
    parser.add_argument("--backend", choices=("builtin", "transformers"), default="builtin")
    parser.add_argument("--dim", type=int, default=256)
    parser.add_argument("--embedder-model", default="BAAI/bge-m3")
    parser.add_argument("--sparse-model", default="naver/splade-cocondenser-ensembledistil")
    parser.add_argument("--reranker-model", default="BAAI/bge-reranker-v2-m3")
    parser.add_argument("--generator-model", default="Qwen/Qwen2.5-7B-Instruct")
    args = parser.parse_args(argv)
    if args.backend == "transformers" and args.dim == 256:
        args.dim = 1024

    import uvicorn

    uvicorn.run(build_app(args), host=args.host, port=args.port, log_level="warning")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
