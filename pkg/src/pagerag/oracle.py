"""Candidate-set restriction for the standard / oracle-doc / oracle-page settings."""

from __future__ import annotations

import logging
from enum import Enum
from typing import Callable, FrozenSet, List, Optional, Sequence

from .corpus import Chunk

log = logging.getLogger(__name__)


class OracleMode(Enum):
    STANDARD = "standard"
    ORACLE_DOC = "oracle-doc"
    ORACLE_PAGE = "oracle-page"


def make_filter(
    mode: OracleMode,
    gold_doc: Optional[str] = None,
    gold_pages: Optional[FrozenSet[int]] = None,
) -> Callable[[str, int], bool]:
    """Predicate over (doc_id, page) matching the restriction of `mode`."""
    if mode is OracleMode.STANDARD:
        return lambda doc_id, page: True
    if gold_doc is None:
        raise ValueError(f"{mode.value} requires gold_doc")
    if mode is OracleMode.ORACLE_DOC:
        return lambda doc_id, page: doc_id == gold_doc
    if gold_pages is None:
        raise ValueError("oracle-page requires gold_pages")
    pages = frozenset(gold_pages)
    return lambda doc_id, page: doc_id == gold_doc and page in pages


def restrict(
    chunks: Sequence[Chunk],
    mode: OracleMode,
    gold_doc: Optional[str] = None,
    gold_pages: Optional[FrozenSet[int]] = None,
) -> List[Chunk]:
    """Filter the candidate chunk set for one query under the given setting."""
    flt = make_filter(mode, gold_doc, gold_pages)
    kept = [c for c in chunks if flt(c.doc_id, c.page)]
    if chunks and not kept and mode is not OracleMode.STANDARD:
        log.warning(
            "oracle restriction (%s, doc=%s) left no candidate chunks", mode.value, gold_doc
        )
    return kept
