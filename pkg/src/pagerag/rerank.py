"""Two-stage retrieval: over-retrieve candidates, rescore with a cross-encoder."""

from __future__ import annotations

from .clients import RerankClient
from .results import RankedEntry, RankedList, rank_entries


class RerankError(RuntimeError):
    """The cross-encoder client failed; reranked runs never silently degrade."""


def rerank(
    q: str,
    candidates: RankedList,
    scorer: RerankClient,
    k: int,
    n_candidates: int = 20,
) -> RankedList:
    """Rescore the first n_candidates with the cross-encoder and keep top-k.

    Base scores are replaced by reranker scores; provenance records both the
    base retriever and the reranker id. A scorer failure is an error.
    """
    if not candidates.entries:
        raise ValueError("candidates must be nonempty")
    if k > n_candidates:
        raise ValueError(f"k ({k}) must be <= N ({n_candidates})")
    pool = candidates.entries[:n_candidates]
    try:
        scores = scorer.score(q, [e.text for e in pool])
    except Exception as exc:
        raise RerankError(f"cross-encoder scoring failed: {exc}") from exc
    if len(scores) != len(pool):
        raise RerankError(f"scorer returned {len(scores)} scores for {len(pool)} passages")
    rescored = [
        RankedEntry(
            chunk_key=e.chunk_key,
            doc_id=e.doc_id,
            page=e.page,
            score=float(s),
            text=e.text,
        )
        for e, s in zip(pool, scores)
    ]
    name = f"{candidates.retriever or 'base'}+rerank:{getattr(scorer, 'model_id', 'unknown')}"
    return RankedList(rank_entries(rescored, k), retriever=name, qid=candidates.qid)
