"""Finance-aware tokenization and Okapi BM25 ranking over chunks."""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from typing import Dict, List, Sequence

from .corpus import Chunk
from .results import RankedEntry, RankedList, rank_entries

# Keeps $/€/£ (attached or standalone), % suffixes, and numbers with
# digit-grouping commas and decimals as single tokens. Recorded here as the
# auditable token grammar.
FINANCE_TOKEN_RE = re.compile(r"[$€£]?\d+(?:,\d+)*(?:\.\d+)?%?|[a-z][a-z'&]*%?|[$€£%]")


def finance_tokenize(text: str) -> List[str]:
    """Lowercased tokens preserving currency symbols, percents, and numerals."""
    return FINANCE_TOKEN_RE.findall(text.lower())


@dataclass
class Bm25Index:
    chunks: List[Chunk]
    term_freqs: List[Dict[str, int]]
    doc_lens: List[int]
    doc_freq: Dict[str, int]
    avg_len: float
    k1: float = 1.5
    b: float = 0.75

    def __len__(self) -> int:
        return len(self.chunks)


def bm25_build(chunks: Sequence[Chunk], k1: float = 1.5, b: float = 0.75) -> Bm25Index:
    term_freqs: List[Dict[str, int]] = []
    doc_lens: List[int] = []
    doc_freq: Counter = Counter()
    for chunk in chunks:
        tokens = finance_tokenize(chunk.text)
        tf = dict(Counter(tokens))
        term_freqs.append(tf)
        doc_lens.append(len(tokens))
        doc_freq.update(tf.keys())
    avg_len = sum(doc_lens) / len(doc_lens) if doc_lens else 0.0
    index = Bm25Index(
        chunks=list(chunks),
        term_freqs=term_freqs,
        doc_lens=doc_lens,
        doc_freq=dict(doc_freq),
        avg_len=avg_len,
        k1=k1,
        b=b,
    )
    return index


def bm25_score(index: Bm25Index, query_tokens: Sequence[str], i: int) -> float:
    """Okapi score of chunk i; IDF = ln(1 + (N - df + 0.5)/(df + 0.5))."""
    n = len(index.chunks)
    tf = index.term_freqs[i]
    dl = index.doc_lens[i]
    norm = index.k1 * (1 - index.b + index.b * dl / index.avg_len) if index.avg_len else 0.0
    score = 0.0
    for term in query_tokens:
        df = index.doc_freq.get(term)
        if not df:
            continue
        freq = tf.get(term, 0)
        idf = math.log(1.0 + (n - df + 0.5) / (df + 0.5))
        denom = freq + norm
        if denom > 0:
            score += idf * freq * (index.k1 + 1) / denom
    return score


def bm25_search(index: Bm25Index, query: str, k: int) -> RankedList:
    if k < 1:
        raise ValueError("k must be >= 1")
    if not index.chunks:
        return RankedList(retriever="bm25")
    query_tokens = finance_tokenize(query)
    entries = [
        RankedEntry(
            chunk_key=chunk.chunk_key,
            doc_id=chunk.doc_id,
            page=chunk.page,
            score=bm25_score(index, query_tokens, i),
            text=chunk.text,
        )
        for i, chunk in enumerate(index.chunks)
    ]
    return RankedList(rank_entries(entries, k), retriever="bm25")
