"""Model backends for the bridge service.

`BuiltinBackend` is fully deterministic and dependency-free: it serves the
same hashing embedder and mock encoder/reranker/generator the retrieval
library uses offline, which makes the service testable (and useful for
integration runs) without any model checkpoints on disk.

`TransformersBackend` loads real checkpoints lazily; a missing artifact
surfaces as `ModelUnavailable`, which the HTTP layer maps to a structured
503 naming the model.
"""

from __future__ import annotations

from typing import Dict, List, Protocol, Sequence

import numpy as np

from pagerag.clients import (
    CosineMockReranker,
    ExtractiveMockGenerator,
    MockSparseEncoder,
)
from pagerag.dense import HashingEmbedder, SparseVector


class ModelUnavailable(RuntimeError):
    """A requested model could not be loaded."""

    def __init__(self, model_id: str, reason: str):
        super().__init__(f"{model_id}: {reason}")
        self.model_id = model_id


class Backend(Protocol):
    dim: int

    def model_ids(self) -> Dict[str, str]: ...

    def embed(self, texts: Sequence[str], prefix: str = "") -> np.ndarray: ...

    def embed_sparse(self, texts: Sequence[str]) -> List[SparseVector]: ...

    def rerank(self, query: str, passages: Sequence[str]) -> List[float]: ...

    def generate(self, prompt: str, temperature: float, max_tokens: int) -> str: ...


class BuiltinBackend:
    """Deterministic checkpoint-free backend."""

    def __init__(self, dim: int = 256):
        self.dim = dim
        self._embedder = HashingEmbedder(dim)
        self._sparse = MockSparseEncoder()
        self._reranker = CosineMockReranker(dim)
        self._generator = ExtractiveMockGenerator()

    def model_ids(self) -> Dict[str, str]:
        return {
            "embedder": self._embedder.embedder_id,
            "sparse_encoder": self._sparse.model_id,
            "reranker": self._reranker.model_id,
            "generator": self._generator.model_id,
        }

    def embed(self, texts: Sequence[str], prefix: str = "") -> np.ndarray:
        return self._embedder.embed([prefix + t for t in texts])

    def embed_sparse(self, texts: Sequence[str]) -> List[SparseVector]:
        return self._sparse.encode(texts)

    def rerank(self, query: str, passages: Sequence[str]) -> List[float]:
        return self._reranker.score(query, passages)

    def generate(self, prompt: str, temperature: float, max_tokens: int) -> str:
        return self._generator.generate(prompt, temperature, max_tokens)


class TransformersBackend:
    """Real-model backend; every model loads lazily on first use."""

    def __init__(
        self,
        embedder_model: str = "BAAI/bge-m3",
        sparse_model: str = "naver/splade-cocondenser-ensembledistil",
        reranker_model: str = "BAAI/bge-reranker-v2-m3",
        generator_model: str = "Qwen/Qwen2.5-7B-Instruct",
        dim: int = 1024,
    ):
        self.dim = dim
        self._names = {
            "embedder": embedder_model,
            "sparse_encoder": sparse_model,
            "reranker": reranker_model,
            "generator": generator_model,
        }
        self._embedder = None
        self._reranker = None
        self._generator = None
        self._sparse = None

    def model_ids(self) -> Dict[str, str]:
        return dict(self._names)

    def _load_embedder(self):
        if self._embedder is None:
            try:
                from sentence_transformers import SentenceTransformer

                self._embedder = SentenceTransformer(self._names["embedder"])
            except Exception as exc:
                raise ModelUnavailable(self._names["embedder"], str(exc)) from exc
        return self._embedder

    def embed(self, texts: Sequence[str], prefix: str = "") -> np.ndarray:
        model = self._load_embedder()
        vectors = model.encode(
            [prefix + t for t in texts], normalize_embeddings=True, convert_to_numpy=True
        )
        return np.asarray(vectors, dtype=np.float64)

    def _load_sparse(self):
        if self._sparse is None:
            try:
                import torch
                from transformers import AutoModelForMaskedLM, AutoTokenizer

                name = self._names["sparse_encoder"]
                self._sparse = (
                    AutoTokenizer.from_pretrained(name),
                    AutoModelForMaskedLM.from_pretrained(name),
                    torch,
                )
            except Exception as exc:
                raise ModelUnavailable(self._names["sparse_encoder"], str(exc)) from exc
        return self._sparse

    def embed_sparse(self, texts: Sequence[str]) -> List[SparseVector]:
        tokenizer, model, torch = self._load_sparse()
        out: List[SparseVector] = []
        with torch.no_grad():
            for text in texts:
                batch = tokenizer(text, truncation=True, max_length=512, return_tensors="pt")
                logits = model(**batch).logits.squeeze(0)
                weights, _ = torch.max(
                    torch.log1p(torch.relu(logits))
                    * batch["attention_mask"].squeeze(0).unsqueeze(-1),
                    dim=0,
                )
                values, indices = torch.topk(weights, k=min(256, weights.numel()))
                vec = {
                    tokenizer.convert_ids_to_tokens(int(i)): float(v)
                    for v, i in zip(values, indices)
                    if float(v) > 0.0
                }
                out.append(vec)
        return out

    def _load_reranker(self):
        if self._reranker is None:
            try:
                from sentence_transformers import CrossEncoder

                self._reranker = CrossEncoder(self._names["reranker"])
            except Exception as exc:
                raise ModelUnavailable(self._names["reranker"], str(exc)) from exc
        return self._reranker

    def rerank(self, query: str, passages: Sequence[str]) -> List[float]:
        model = self._load_reranker()
        return [float(s) for s in model.predict([(query, p) for p in passages])]

    def _load_generator(self):
        if self._generator is None:
            try:
                from transformers import pipeline

                self._generator = pipeline("text-generation", model=self._names["generator"])
            except Exception as exc:
                raise ModelUnavailable(self._names["generator"], str(exc)) from exc
        return self._generator

    def generate(self, prompt: str, temperature: float, max_tokens: int) -> str:
        pipe = self._load_generator()
        kwargs = {"max_new_tokens": max_tokens, "return_full_text": False}
        if temperature > 0:
            kwargs.update(do_sample=True, temperature=temperature)
        else:
            kwargs.update(do_sample=False)
        return pipe(prompt, **kwargs)[0]["generated_text"]
