"""Learned page scorer: page-level index, contrastively trained linear adapter
over frozen base embeddings, document-level cross-validation folds, and
page-then-chunk two-stage retrieval."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from .corpus import Corpus, QASample, normalize_page
from .dense import Embedder, VectorIndex, dense_search
from .results import RankedList


class LeakageError(ValueError):
    """A training pair's document falls in the fold's evaluation set."""


@dataclass
class Adapter:
    """Linear relevance adapter: adapted(v) = normalize(W @ v), W init identity."""

    weight: np.ndarray
    metadata: Dict[str, object] = field(default_factory=dict)

    @classmethod
    def identity(cls, dim: int, **metadata: object) -> "Adapter":
        return cls(weight=np.eye(dim, dtype=np.float64), metadata=dict(metadata))

    @property
    def dim(self) -> int:
        return int(self.weight.shape[0])

    def adapt(self, vectors: np.ndarray) -> np.ndarray:
        """Apply W and renormalize rows (or a single vector)."""
        single = vectors.ndim == 1
        mat = np.atleast_2d(vectors) @ self.weight.T
        norms = np.linalg.norm(mat, axis=1, keepdims=True)
        norms[norms == 0.0] = 1.0
        mat = mat / norms
        return mat[0] if single else mat

    def save(self, path: str) -> None:
        payload = {
            "v": 1,
            "weight": [[float(x) for x in row] for row in self.weight],
            "metadata": self.metadata,
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True)

    @classmethod
    def load(cls, path: str) -> "Adapter":
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        if payload.get("v") != 1:
            raise ValueError(f"unsupported adapter file version {payload.get('v')}")
        return cls(
            weight=np.asarray(payload["weight"], dtype=np.float64),
            metadata=dict(payload.get("metadata", {})),
        )


@dataclass(frozen=True)
class TrainPair:
    qid: str
    question: str
    doc_id: str
    page: int


@dataclass(frozen=True)
class Fold:
    train_docs: FrozenSet[str]
    eval_docs: FrozenSet[str]


@dataclass
class FoldPlan:
    folds: List[Fold]
    seed: int

    def eval_qids(self, samples: Sequence[QASample], fold_idx: int) -> List[str]:
        eval_docs = self.folds[fold_idx].eval_docs
        return [s.qid for s in samples if s.gold_doc in eval_docs]


@dataclass
class TrainConfig:
    learning_rate: float = 5e-2
    batch_size: int = 16
    epochs: int = 15
    scale: float = 20.0  # cosine logits are multiplied by this before softmax
    seed: int = 0
    page_max_chars: int = 2000


def build_page_index(corpus: Corpus, embedder: Embedder, max_chars: int = 2000) -> VectorIndex:
    """One unit vector per page with nonempty normalized text, computed offline."""
    records = [p for p in corpus if normalize_page(p.text, max_chars)]
    texts = [normalize_page(p.text, max_chars) for p in records]
    vectors = embedder.embed(texts)
    return VectorIndex(
        vectors=vectors,
        chunk_keys=[f"{p.doc_id}:{p.page}" for p in records],
        doc_ids=[p.doc_id for p in records],
        pages=[p.page for p in records],
        texts=texts,
        embedder_id=getattr(embedder, "embedder_id", ""),
    )


def make_pairs(samples: Sequence[QASample]) -> List[TrainPair]:
    """One (question, gold page) pair per annotated page of each question."""
    pairs: List[TrainPair] = []
    for s in samples:
        for page in sorted(s.gold_pages):
            pairs.append(TrainPair(qid=s.qid, question=s.question, doc_id=s.gold_doc, page=page))
    return pairs


def make_folds(samples: Sequence[QASample], n: int = 5, seed: int = 0) -> FoldPlan:
    """Shuffle the gold-document universe with the seed and split it into n
    near-equal eval groups; fold i trains on everything outside group i."""
    docs = sorted({s.gold_doc for s in samples})
    if len(docs) < n:
        raise ValueError(f"need at least {n} distinct documents, got {len(docs)}")
    rng = random.Random(seed)
    rng.shuffle(docs)
    groups: List[List[str]] = [[] for _ in range(n)]
    for i, doc in enumerate(docs):
        groups[i % n].append(doc)
    folds = [
        Fold(
            train_docs=frozenset(d for j, g in enumerate(groups) if j != i for d in g),
            eval_docs=frozenset(groups[i]),
        )
        for i in range(n)
    ]
    return FoldPlan(folds=folds, seed=seed)


def page_score(
    q: str,
    doc_id: str,
    page: int,
    corpus: Corpus,
    encoder: Embedder,
    adapter: Adapter,
    max_chars: int = 2000,
) -> float:
    """Cosine of the adapted query and adapted normalized-page embeddings."""
    record = corpus.get(doc_id, page)  # raises KeyError for unknown pages
    q_vec = adapter.adapt(encoder.embed([q])[0])
    p_vec = adapter.adapt(encoder.embed([normalize_page(record.text, max_chars)])[0])
    return float(q_vec @ p_vec)


def mnr_loss(score_matrix: np.ndarray, scale: float = 20.0) -> Tuple[float, np.ndarray]:
    """Multiple-negatives-ranking loss over a B x B in-batch score matrix.

    loss = -(1/B) * sum_i [scale*s_ii - logsumexp_j(scale*s_ij)], computed
    with a stable log-sum-exp. Returns (loss, d loss / d scores), with the
    gradient exact: (scale/B) * (softmax_rows(scale*S) - I).
    """
    s = np.asarray(score_matrix, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ValueError("score matrix must be square")
    b = s.shape[0]
    logits = scale * s
    row_max = logits.max(axis=1, keepdims=True)
    exp = np.exp(logits - row_max)
    denom = exp.sum(axis=1, keepdims=True)
    log_sum = np.log(denom).ravel() + row_max.ravel()
    loss = float(np.mean(log_sum - np.diag(logits)))
    softmax = exp / denom
    grad = (scale / b) * (softmax - np.eye(b))
    return loss, grad


def _adapter_step(
    weight: np.ndarray,
    q_base: np.ndarray,
    p_base: np.ndarray,
    scale: float,
) -> Tuple[float, np.ndarray]:
    """Loss and gradient w.r.t. W for one batch of base-embedding pairs.

    Forward: U = Q W^T, A = rownorm(U); V = P W^T, B = rownorm(V);
    S = A B^T; loss via mnr_loss. Backward chains the row-normalization
    Jacobian (dL/du = (g - (g.a) a) / |u|) into dW = dU^T Q + dV^T P.
    """
    u = q_base @ weight.T
    v = p_base @ weight.T
    u_norm = np.linalg.norm(u, axis=1, keepdims=True)
    v_norm = np.linalg.norm(v, axis=1, keepdims=True)
    u_norm[u_norm == 0.0] = 1.0
    v_norm[v_norm == 0.0] = 1.0
    a = u / u_norm
    bvec = v / v_norm
    scores = a @ bvec.T
    loss, g_scores = mnr_loss(scores, scale)
    g_a = g_scores @ bvec
    g_b = g_scores.T @ a
    g_u = (g_a - (g_a * a).sum(axis=1, keepdims=True) * a) / u_norm
    g_v = (g_b - (g_b * bvec).sum(axis=1, keepdims=True) * bvec) / v_norm
    g_w = g_u.T @ q_base + g_v.T @ p_base
    return loss, g_w


def train_adapter(
    pairs: Sequence[TrainPair],
    encoder: Embedder,
    corpus: Corpus,
    fold: Optional[Fold] = None,
    config: Optional[TrainConfig] = None,
) -> Tuple[Adapter, List[float]]:
    """Mini-batch gradient descent on the in-batch contrastive loss.

    Returns the trained adapter and the per-epoch mean loss trace. Any pair
    whose document lies in the fold's eval set raises LeakageError.
    """
    config = config or TrainConfig()
    if fold is not None:
        leaked = sorted({p.doc_id for p in pairs if p.doc_id in fold.eval_docs})
        if leaked:
            raise LeakageError(f"training pairs reference eval-fold documents: {leaked}")
        missing = sorted({p.doc_id for p in pairs if p.doc_id not in fold.train_docs})
        if missing:
            raise LeakageError(f"training pairs reference documents outside the fold: {missing}")

    q_base = encoder.embed([p.question for p in pairs])
    p_base = encoder.embed(
        [normalize_page(corpus.get(p.doc_id, p.page).text, config.page_max_chars) for p in pairs]
    )
    weight = np.eye(encoder.dim, dtype=np.float64)
    rng = random.Random(config.seed)
    trace: List[float] = []
    order = list(range(len(pairs)))
    for _ in range(config.epochs):
        rng.shuffle(order)
        losses: List[float] = []
        for start in range(0, len(order), config.batch_size):
            batch = order[start : start + config.batch_size]
            loss, g_w = _adapter_step(weight, q_base[batch], p_base[batch], config.scale)
            weight -= config.learning_rate * g_w
            losses.append(loss)
        trace.append(float(np.mean(losses)) if losses else 0.0)
    adapter = Adapter(
        weight=weight,
        metadata={
            "base_embedder": getattr(encoder, "embedder_id", ""),
            "scale": config.scale,
            "learning_rate": config.learning_rate,
            "batch_size": config.batch_size,
            "epochs": config.epochs,
            "seed": config.seed,
            "n_pairs": len(pairs),
            "loss_trace": trace,
        },
    )
    return adapter, trace


def page_then_chunk(
    q: str,
    page_index: VectorIndex,
    adapter: Adapter,
    chunk_index: VectorIndex,
    encoder: Embedder,
    top_pages: int = 20,
    k: int = 5,
    flt: Optional[Callable[[str, int], bool]] = None,
) -> RankedList:
    """Two-stage retrieval: rank all pages by adapted cosine, keep the top P
    (doc, page) pairs, then run exact chunk search restricted to those pages.

    An optional (doc_id, page) predicate restricts both stages (oracle modes).
    """
    q_base = encoder.embed([q])[0]
    q_adapted = adapter.adapt(q_base)
    page_scores = adapter.adapt(page_index.vectors) @ q_adapted
    candidates = [
        i
        for i in range(len(page_index))
        if flt is None or flt(page_index.doc_ids[i], page_index.pages[i])
    ]
    ranked_pages = sorted(
        candidates,
        key=lambda i: (-page_scores[i], page_index.doc_ids[i], page_index.pages[i]),
    )[:top_pages]
    selected = {(page_index.doc_ids[i], page_index.pages[i]) for i in ranked_pages}
    result = dense_search(
        chunk_index,
        q_base,
        k,
        flt=lambda doc_id, page: (doc_id, page) in selected,
    )
    return RankedList(result.entries, retriever="page-then-chunk", qid=result.qid)
