"""Model client contracts: deterministic mocks for offline runs and tests,
plus HTTP clients for the external inference bridge."""

from __future__ import annotations

import math
from collections import Counter
from typing import Dict, List, Optional, Protocol, Sequence

import numpy as np

from .dense import Embedder, HashingEmbedder, SparseVector
from .lexical import finance_tokenize

PROTOCOL_VERSION = 1

SPARSE_MAX_TERMS = 256
SPARSE_MAX_INPUT_TOKENS = 512


class BridgeError(RuntimeError):
    """The inference bridge is unreachable or returned an invalid response."""


class GeneratorClient(Protocol):
    def generate(self, prompt: str, temperature: float = 0.0, max_tokens: int = 512) -> str: ...


class RerankClient(Protocol):
    model_id: str

    def score(self, query: str, passages: Sequence[str]) -> List[float]: ...


class SparseEncoderClient(Protocol):
    model_id: str

    def encode(self, texts: Sequence[str]) -> List[SparseVector]: ...


class MockSparseEncoder:
    """Deterministic learned-sparse stand-in: log-scaled term frequencies,
    truncated to the bridge contract (512 input tokens, 256 terms)."""

    model_id = "mock-sparse"

    def encode(self, texts: Sequence[str]) -> List[SparseVector]:
        out: List[SparseVector] = []
        for text in texts:
            tokens = finance_tokenize(text)[:SPARSE_MAX_INPUT_TOKENS]
            counts = Counter(tokens)
            weighted = {t: 1.0 + math.log(c) for t, c in counts.items()}
            top = sorted(weighted.items(), key=lambda kv: (-kv[1], kv[0]))[:SPARSE_MAX_TERMS]
            out.append(dict(top))
        return out


class CosineMockReranker:
    """Cross-encoder stand-in scoring passages by hashing-embedding cosine."""

    model_id = "mock-reranker"

    def __init__(self, dim: int = 256):
        self._embedder = HashingEmbedder(dim)

    def score(self, query: str, passages: Sequence[str]) -> List[float]:
        qv = self._embedder.embed_one(query)
        return [float(self._embedder.embed_one(p) @ qv) for p in passages]


class ExtractiveMockGenerator:
    """Deterministic generator stand-in: answers with the context window that
    best overlaps the question, so retrieval quality shows up downstream."""

    model_id = "mock-generator"

    def generate(self, prompt: str, temperature: float = 0.0, max_tokens: int = 512) -> str:
        context = _between(prompt, "Context:", "Question:")
        question = _between(prompt, "Question:", "Answer:")
        q_tokens = set(finance_tokenize(question))
        best, best_overlap = "", -1
        for block in context.split("\n\n"):
            block = block.strip()
            if not block:
                continue
            overlap = len(q_tokens & set(finance_tokenize(block)))
            if overlap > best_overlap:
                best, best_overlap = block, overlap
        tokens = best.split()[:max_tokens]
        return " ".join(tokens)


def _between(text: str, start: str, end: str) -> str:
    i = text.find(start)
    if i < 0:
        return ""
    j = text.find(end, i)
    segment = text[i + len(start) : j if j >= 0 else len(text)]
    return segment.strip()


class EchoGenerator:
    """Returns the question portion of the prompt; useful in HyDE tests."""

    model_id = "echo-generator"

    def generate(self, prompt: str, temperature: float = 0.0, max_tokens: int = 512) -> str:
        marker = "Question:"
        i = prompt.find(marker)
        if i < 0:
            return prompt
        rest = prompt[i + len(marker) :]
        for stop in ("Passage:", "Answer:"):
            j = rest.find(stop)
            if j >= 0:
                rest = rest[:j]
        return rest.strip()


def _post(endpoint: str, path: str, payload: dict, timeout: float) -> dict:
    import requests

    try:
        resp = requests.post(endpoint.rstrip("/") + path, json=payload, timeout=timeout)
    except requests.RequestException as exc:
        raise BridgeError(f"bridge unreachable at {endpoint}{path}: {exc}") from exc
    if resp.status_code != 200:
        raise BridgeError(f"bridge {path} returned {resp.status_code}: {resp.text[:200]}")
    try:
        return resp.json()
    except ValueError as exc:
        raise BridgeError(f"bridge {path} returned non-JSON body") from exc


class BridgeEmbedder:
    """Dense embedding client for the bridge /embed endpoint."""

    def __init__(self, endpoint: str, dim: int, prefix: str = "", timeout: float = 60.0):
        self.endpoint = endpoint
        self.dim = dim
        self.prefix = prefix
        self.timeout = timeout
        self.embedder_id = f"bridge:{endpoint}"

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        body = _post(
            self.endpoint,
            "/embed",
            {"v": PROTOCOL_VERSION, "texts": list(texts), "prefix": self.prefix},
            self.timeout,
        )
        vectors = np.asarray(body["vectors"], dtype=np.float64)
        if vectors.shape != (len(texts), self.dim):
            raise BridgeError(f"/embed returned shape {vectors.shape}, expected ({len(texts)}, {self.dim})")
        self.embedder_id = f"bridge:{body.get('model_id', self.endpoint)}"
        return vectors

    def embed_one(self, text: str) -> np.ndarray:
        return self.embed([text])[0]


class BridgeSparseEncoder:
    model_id = "bridge-sparse"

    def __init__(self, endpoint: str, timeout: float = 60.0):
        self.endpoint = endpoint
        self.timeout = timeout

    def encode(self, texts: Sequence[str]) -> List[SparseVector]:
        body = _post(
            self.endpoint,
            "/embed_sparse",
            {"v": PROTOCOL_VERSION, "texts": list(texts)},
            self.timeout,
        )
        self.model_id = str(body.get("model_id", self.model_id))
        vectors = body["vectors"]
        if len(vectors) != len(texts):
            raise BridgeError("/embed_sparse arity mismatch")
        out: List[SparseVector] = []
        for vec in vectors:
            if len(vec) > SPARSE_MAX_TERMS:
                raise BridgeError("/embed_sparse returned more than 256 terms")
            out.append({str(t): float(w) for t, w in vec.items()})
        return out


class BridgeReranker:
    model_id = "bridge-reranker"

    def __init__(self, endpoint: str, timeout: float = 120.0):
        self.endpoint = endpoint
        self.timeout = timeout

    def score(self, query: str, passages: Sequence[str]) -> List[float]:
        body = _post(
            self.endpoint,
            "/rerank",
            {"v": PROTOCOL_VERSION, "query": query, "passages": list(passages)},
            self.timeout,
        )
        self.model_id = str(body.get("model_id", self.model_id))
        scores = [float(s) for s in body["scores"]]
        if len(scores) != len(passages):
            raise BridgeError("/rerank arity mismatch")
        return scores


class BridgeGenerator:
    model_id = "bridge-generator"

    def __init__(self, endpoint: str, timeout: float = 300.0):
        self.endpoint = endpoint
        self.timeout = timeout

    def generate(self, prompt: str, temperature: float = 0.0, max_tokens: int = 512) -> str:
        body = _post(
            self.endpoint,
            "/generate",
            {
                "v": PROTOCOL_VERSION,
                "prompt": prompt,
                "temperature": temperature,
                "max_tokens": max_tokens,
            },
            self.timeout,
        )
        self.model_id = str(body.get("model_id", self.model_id))
        return str(body["text"])


def bridge_health(endpoint: str, timeout: float = 10.0) -> Dict[str, object]:
    import requests

    try:
        resp = requests.get(endpoint.rstrip("/") + "/health", timeout=timeout)
    except requests.RequestException as exc:
        raise BridgeError(f"bridge unreachable at {endpoint}/health: {exc}") from exc
    if resp.status_code != 200:
        raise BridgeError(f"bridge /health returned {resp.status_code}")
    return resp.json()
