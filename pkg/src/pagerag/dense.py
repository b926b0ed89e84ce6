"""Embedding contract, exact cosine vector search with metadata filtering,
learned-sparse dot-product search, and a deterministic hashing embedder."""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Protocol, Sequence, Tuple

import numpy as np

from .corpus import Chunk
from .lexical import finance_tokenize
from .results import RankedEntry, RankedList, rank_entries

log = logging.getLogger(__name__)

VECTOR_CACHE_VERSION = 1

SparseVector = Dict[str, float]


class Embedder(Protocol):
    """Maps texts to unit-norm vectors of a fixed dimension."""

    dim: int
    embedder_id: str

    def embed(self, texts: Sequence[str]) -> np.ndarray: ...


def _stable_hash(token: str) -> int:
    return int.from_bytes(hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest(), "big")


class HashingEmbedder:
    """Deterministic feature-hashing embedder over finance tokens.

    Each token hashes to a bucket with a sign hash; the vector is
    L2-normalized. Text with no tokens maps to the zero vector (left
    unnormalized; a zero norm is the flag for downstream callers).
    """

    def __init__(self, dim: int = 256):
        if dim < 8:
            raise ValueError("dim must be >= 8")
        self.dim = dim
        self.embedder_id = f"hash-{dim}"

    def embed_one(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=np.float64)
        for token in finance_tokenize(text):
            h = _stable_hash(token)
            bucket = h % self.dim
            sign = 1.0 if (h >> 32) & 1 else -1.0
            vec[bucket] += sign
        norm = np.linalg.norm(vec)
        if norm == 0.0:
            log.debug("zero-token text embedded as zero vector")
            return vec
        return vec / norm

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            return np.zeros((0, self.dim), dtype=np.float64)
        return np.stack([self.embed_one(t) for t in texts])


@dataclass
class VectorIndex:
    vectors: np.ndarray  # (n, dim), unit rows (zero rows allowed for empty text)
    chunk_keys: List[str]
    doc_ids: List[str]
    pages: List[int]
    texts: List[str] = field(default_factory=list)
    embedder_id: str = ""

    def __len__(self) -> int:
        return len(self.chunk_keys)

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])


def build_vector_index(chunks: Sequence[Chunk], embedder: Embedder) -> VectorIndex:
    vectors = embedder.embed([c.text for c in chunks])
    return VectorIndex(
        vectors=vectors,
        chunk_keys=[c.chunk_key for c in chunks],
        doc_ids=[c.doc_id for c in chunks],
        pages=[c.page for c in chunks],
        texts=[c.text for c in chunks],
        embedder_id=getattr(embedder, "embedder_id", ""),
    )


def dense_search(
    index: VectorIndex,
    query_vec: np.ndarray,
    k: int,
    flt: Optional[Callable[[str, int], bool]] = None,
) -> RankedList:
    """Exact brute-force cosine top-k over chunks passing the (doc_id, page) filter."""
    query_vec = np.asarray(query_vec, dtype=np.float64)
    if query_vec.shape != (index.dim,):
        raise ValueError(f"query dim {query_vec.shape} != index dim ({index.dim},)")
    if len(index) == 0:
        return RankedList(retriever="dense")
    scores = index.vectors @ query_vec
    entries = []
    for i, key in enumerate(index.chunk_keys):
        if flt is not None and not flt(index.doc_ids[i], index.pages[i]):
            continue
        entries.append(
            RankedEntry(
                chunk_key=key,
                doc_id=index.doc_ids[i],
                page=index.pages[i],
                score=float(scores[i]),
                text=index.texts[i] if index.texts else "",
            )
        )
    return RankedList(rank_entries(entries, k), retriever="dense")


def sparse_dot(a: SparseVector, b: SparseVector) -> float:
    if len(b) < len(a):
        a, b = b, a
    return sum(w * b[t] for t, w in a.items() if t in b)


def sparse_search(
    vectors: Sequence[Tuple[str, SparseVector]],
    query: SparseVector,
    k: int,
    meta: Optional[Dict[str, Tuple[str, int, str]]] = None,
) -> RankedList:
    """Rank chunks by sparse dot product against the query vector.

    `meta` optionally maps chunk_key -> (doc_id, page, text) for provenance.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    entries = []
    for key, vec in vectors:
        doc_id, page, text = meta.get(key, ("", -1, "")) if meta else ("", -1, "")
        entries.append(
            RankedEntry(
                chunk_key=key,
                doc_id=doc_id,
                page=page,
                score=sparse_dot(query, vec),
                text=text,
            )
        )
    return RankedList(rank_entries(entries, k), retriever="sparse-learned")


def save_vector_cache(index: VectorIndex, path: str) -> None:
    """Persist chunk vectors as versioned JSON Lines keyed by chunk_key."""
    with open(path, "w", encoding="utf-8") as fh:
        header = {"v": VECTOR_CACHE_VERSION, "embedder": index.embedder_id, "dim": index.dim}
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for i, key in enumerate(index.chunk_keys):
            row = {
                "chunk_key": key,
                "doc_id": index.doc_ids[i],
                "page": index.pages[i],
                "vector": [round(float(x), 12) for x in index.vectors[i]],
            }
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def load_vector_cache(path: str) -> VectorIndex:
    with open(path, "r", encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        if header.get("v") != VECTOR_CACHE_VERSION:
            raise ValueError(f"unsupported vector cache version {header.get('v')}")
        keys: List[str] = []
        doc_ids: List[str] = []
        pages: List[int] = []
        rows: List[List[float]] = []
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            keys.append(row["chunk_key"])
            doc_ids.append(row["doc_id"])
            pages.append(int(row["page"]))
            rows.append(row["vector"])
    vectors = np.asarray(rows, dtype=np.float64) if rows else np.zeros((0, header["dim"]))
    return VectorIndex(
        vectors=vectors,
        chunk_keys=keys,
        doc_ids=doc_ids,
        pages=pages,
        texts=[],
        embedder_id=header.get("embedder", ""),
    )
