"""Deterministic finance query expansion plus HyDE / Multi-HyDE query vectors."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from .clients import GeneratorClient
from .dense import Embedder

log = logging.getLogger(__name__)

DEFAULT_ACRONYMS: Dict[str, str] = {
    "CAPEX": "capital expenditure",
    "PPE": "property plant equipment",
    "COGS": "cost of goods sold",
    "AR": "accounts receivable",
    "AP": "accounts payable",
    "D&A": "depreciation and amortization",
    "EPS": "earnings per share",
    "EBITDA": "earnings before interest taxes depreciation and amortization",
}

_FY_RE = re.compile(r"\bFY(\d{4}|\d{2})\b")
_TOKEN_TRIM_RE = re.compile(r"^[^\w$€£%&]+|[^\w$€£%&]+$")

HYDE_PROMPT = (
    "Please write a short financial report excerpt (1 paragraph) that precisely "
    "answers the question below. Do not introduce the text, just write the excerpt.\n"
    "\n"
    "Question: {question}\n"
    "\n"
    "Passage:\n"
)

HYDE_TEMPERATURE = 0.7
HYDE_MAX_TOKENS = 200


@dataclass
class ExpansionTable:
    """Acronym -> expansion map; matching is a case-sensitive uppercase token
    match and expansions are appended to the query, never substituted."""

    acronyms: Dict[str, str] = field(default_factory=lambda: dict(DEFAULT_ACRONYMS))

    @classmethod
    def load(cls, path: str) -> "ExpansionTable":
        """Read `ACRONYM = expansion` lines; '#' starts a comment."""
        table: Dict[str, str] = {}
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"bad acronym line (expected KEY = value): {line!r}")
                key, value = line.split("=", 1)
                table[key.strip()] = value.strip()
        return cls(acronyms=table)


def expand_query(q: str, table: Optional[ExpansionTable] = None) -> str:
    """Append acronym expansions and canonical fiscal-year forms to the query.

    The original question is preserved at the front (generation always uses
    the unexpanded question; expansion is retrieval-only). Each expansion is
    appended at most once, so the function is idempotent.
    """
    table = table or ExpansionTable()
    tokens = [_TOKEN_TRIM_RE.sub("", t) for t in q.split()]
    additions = []
    for acronym, expansion in table.acronyms.items():
        if acronym in tokens and expansion not in q and expansion not in additions:
            additions.append(expansion)
    for match in _FY_RE.finditer(q):
        year = match.group(1)
        if len(year) == 2:
            year = str(2000 + int(year))
        canonical = f"fiscal year {year}"
        if canonical not in q and canonical not in additions:
            additions.append(canonical)
    return " ".join([q] + additions) if additions else q


def _normalize(vec: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(vec)
    return vec if norm == 0.0 else vec / norm


def hyde_vector(
    q: str,
    llm: GeneratorClient,
    embedder: Embedder,
    meta: Optional[dict] = None,
) -> np.ndarray:
    """Embed one generated hypothetical passage; fall back to embed(q) on failure."""
    prompt = HYDE_PROMPT.format(question=q)
    try:
        passage = llm.generate(prompt, temperature=HYDE_TEMPERATURE, max_tokens=HYDE_MAX_TOKENS)
    except Exception as exc:
        log.warning("HyDE generation failed, falling back to the raw query: %s", exc)
        if meta is not None:
            meta["hyde_fallback"] = True
        return embedder.embed([q])[0]
    return embedder.embed([passage])[0]


def multi_hyde_vector(
    q: str,
    llm: GeneratorClient,
    embedder: Embedder,
    n: int = 4,
    meta: Optional[dict] = None,
) -> np.ndarray:
    """Mean embedding of n generated passages, renormalized for cosine search.

    Partial generation failures are tolerated (mean over successes); if all n
    fail the raw query embedding is used and the fallback recorded.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    prompt = HYDE_PROMPT.format(question=q)
    passages = []
    for _ in range(n):
        try:
            passages.append(
                llm.generate(prompt, temperature=HYDE_TEMPERATURE, max_tokens=HYDE_MAX_TOKENS)
            )
        except Exception as exc:
            log.warning("Multi-HyDE generation failed: %s", exc)
    if meta is not None:
        meta["multi_hyde_successes"] = len(passages)
    if not passages:
        if meta is not None:
            meta["hyde_fallback"] = True
        return embedder.embed([q])[0]
    vectors = embedder.embed(passages)
    return _normalize(vectors.mean(axis=0))
