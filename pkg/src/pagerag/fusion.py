"""Reciprocal Rank Fusion over ranked lists keyed by stable chunk hashes."""

from __future__ import annotations

from typing import Dict, Sequence

from .results import RankedEntry, RankedList, rank_entries


def rrf_fuse(lists: Sequence[RankedList], k: int, k_rrf: int = 60) -> RankedList:
    """Fuse ranked lists with s(c) = sum over lists of 1/(k_rrf + rank(c)).

    Ranks are 1-based; a chunk absent from a list contributes nothing for it.
    All lists are weighted equally.
    """
    if not lists:
        raise ValueError("need at least one input list")
    scores: Dict[str, float] = {}
    best: Dict[str, RankedEntry] = {}
    for lst in lists:
        for rank, entry in enumerate(lst.entries, start=1):
            scores[entry.chunk_key] = scores.get(entry.chunk_key, 0.0) + 1.0 / (k_rrf + rank)
            best.setdefault(entry.chunk_key, entry)
    fused = [
        RankedEntry(
            chunk_key=key,
            doc_id=best[key].doc_id,
            page=best[key].page,
            score=score,
            text=best[key].text,
        )
        for key, score in scores.items()
    ]
    name = "rrf(" + "+".join(lst.retriever or "?" for lst in lists) + ")"
    qid = lists[0].qid
    return RankedList(rank_entries(fused, k), retriever=name, qid=qid)
