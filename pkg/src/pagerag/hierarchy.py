"""Parent-child retrieval: index small child chunks, map hits to page-pure
parent spans, score parents by their best child."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

from .corpus import Chunk, ChunkConfigError, Corpus, chunk_key, chunk_page, tokenize_words
from .dense import VectorIndex, dense_search
from .results import RankedEntry, RankedList, rank_entries


@dataclass(frozen=True)
class ParentSpan:
    parent_id: str
    chunk_key: str
    doc_id: str
    page: int
    text: str
    token_start: int
    token_end: int


@dataclass
class ParentChildMap:
    parents: Dict[str, ParentSpan]
    child_to_parent: Dict[str, str]  # child chunk_key -> parent_id
    children: List[Chunk] = field(default_factory=list)


def build_parent_child(
    corpus: Corpus,
    child_size: int = 256,
    child_overlap: int = 32,
    parent_size: int = 1024,
) -> ParentChildMap:
    """Parents tile each page with stride parent_size (no overlap); children
    tile as in chunk_page; a child belongs to the parent holding its start token.

    Parents never cross page boundaries, keeping page recall well-defined.
    """
    if child_size >= parent_size:
        raise ChunkConfigError("child_size must be < parent_size")
    if child_overlap >= child_size:
        raise ChunkConfigError("child_overlap must be < child_size")
    parents: Dict[str, ParentSpan] = {}
    child_to_parent: Dict[str, str] = {}
    children: List[Chunk] = []
    for page in corpus:
        tokens = tokenize_words(page.text)
        if not tokens:
            continue
        page_parents: List[ParentSpan] = []
        for idx, start in enumerate(range(0, len(tokens), parent_size)):
            end = min(start + parent_size, len(tokens))
            text = " ".join(tokens[start:end])
            parent = ParentSpan(
                parent_id=f"{page.doc_id}:{page.page}:{idx}",
                chunk_key=chunk_key(text, page.doc_id, page.page),
                doc_id=page.doc_id,
                page=page.page,
                text=text,
                token_start=start,
                token_end=end,
            )
            parents[parent.parent_id] = parent
            page_parents.append(parent)
        for child in chunk_page(page, child_size, child_overlap):
            parent_idx = child.token_start // parent_size
            child_to_parent[child.chunk_key] = page_parents[parent_idx].parent_id
            children.append(child)
    return ParentChildMap(parents=parents, child_to_parent=child_to_parent, children=children)


def parent_child_search(
    q_vec: np.ndarray,
    child_index: VectorIndex,
    pc_map: ParentChildMap,
    k: int,
    candidate_multiplier: int = 4,
) -> RankedList:
    """Retrieve top 4k children, deduplicate by parent, score each parent by
    its best child cosine, return the top-k parents as ranked entries."""
    hits = dense_search(child_index, q_vec, k * candidate_multiplier)
    best_by_parent: Dict[str, float] = {}
    for entry in hits.entries:
        parent_id = pc_map.child_to_parent[entry.chunk_key]
        prev = best_by_parent.get(parent_id)
        if prev is None or entry.score > prev:
            best_by_parent[parent_id] = entry.score
    entries = []
    for parent_id, score in best_by_parent.items():
        parent = pc_map.parents[parent_id]
        entries.append(
            RankedEntry(
                chunk_key=parent.chunk_key,
                doc_id=parent.doc_id,
                page=parent.page,
                score=score,
                text=parent.text,
            )
        )
    return RankedList(rank_entries(entries, k), retriever="parent-child")
