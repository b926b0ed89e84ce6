"""Ranked retrieval results shared by every retriever."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, List


@dataclass(frozen=True)
class RankedEntry:
    chunk_key: str
    doc_id: str
    page: int
    score: float
    text: str = ""


@dataclass
class RankedList:
    """Ordered retrieval results: score descending, chunk_key ascending on ties."""

    entries: List[RankedEntry] = field(default_factory=list)
    retriever: str = ""
    qid: str = ""

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def top(self, k: int) -> "RankedList":
        return RankedList(self.entries[:k], retriever=self.retriever, qid=self.qid)


def rank_entries(entries: Iterable[RankedEntry], k: int | None = None) -> List[RankedEntry]:
    """Sort by score descending with chunk_key tie-break; truncate to k if given."""
    ordered = sorted(entries, key=lambda e: (-e.score, e.chunk_key))
    return ordered if k is None else ordered[:k]


def with_retriever(lst: RankedList, name: str) -> RankedList:
    return RankedList(lst.entries, retriever=name, qid=lst.qid)
