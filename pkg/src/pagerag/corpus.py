"""Page-level corpus ingestion, normalization, chunking, and chunk identity."""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterator, List, Sequence, Tuple

log = logging.getLogger(__name__)

DOC_TYPES = ("10K", "10Q", "8K", "EARNINGS", "OTHER")
QUESTION_TYPES = ("DOMAIN", "METRICS", "NOVEL")

# Joins the fields hashed into a chunk key; a byte that never appears in text.
_KEY_SEP = "\x1f"


class ParseError(ValueError):
    """A corpus or QA line could not be parsed."""


class IntegrityError(ValueError):
    """Loaded data violates a uniqueness or referential invariant."""


class ChunkConfigError(ValueError):
    """Invalid chunking parameters (e.g. overlap >= size)."""


@dataclass(frozen=True)
class PageRecord:
    doc_id: str
    page: int  # 0-indexed
    text: str
    doc_type: str = "OTHER"


@dataclass(frozen=True)
class Chunk:
    chunk_key: str
    doc_id: str
    page: int
    text: str
    token_start: int
    token_end: int


@dataclass(frozen=True)
class QASample:
    qid: str
    question: str
    answer: str
    gold_doc: str
    gold_pages: FrozenSet[int]
    evidence_text: str
    question_type: str = "DOMAIN"
    doc_type: str = "OTHER"


@dataclass
class Corpus:
    pages: List[PageRecord] = field(default_factory=list)
    _by_key: Dict[Tuple[str, int], PageRecord] = field(default_factory=dict, repr=False)

    def add(self, record: PageRecord) -> None:
        key = (record.doc_id, record.page)
        if key in self._by_key:
            raise IntegrityError(f"duplicate page key {key}")
        if record.page < 0:
            raise IntegrityError(f"negative page index for {record.doc_id}")
        self._by_key[key] = record
        self.pages.append(record)

    def get(self, doc_id: str, page: int) -> PageRecord:
        try:
            return self._by_key[(doc_id, page)]
        except KeyError:
            raise KeyError(f"unknown page ({doc_id!r}, {page})") from None

    def __contains__(self, key: Tuple[str, int]) -> bool:
        return key in self._by_key

    def __len__(self) -> int:
        return len(self.pages)

    def __iter__(self) -> Iterator[PageRecord]:
        return iter(self.pages)

    @property
    def doc_ids(self) -> List[str]:
        seen: Dict[str, None] = {}
        for rec in self.pages:
            seen.setdefault(rec.doc_id, None)
        return list(seen)


def collapse_whitespace(text: str) -> str:
    """Collapse every whitespace run to one space and strip the ends."""
    return " ".join(text.split())


def normalize_page(text: str, max_chars: int = 2000) -> str:
    """Whitespace-collapsed page text truncated to max_chars characters."""
    if max_chars <= 0:
        raise ValueError("max_chars must be positive")
    return collapse_whitespace(text)[:max_chars]


def chunk_key(text: str, doc_id: str, page: int) -> str:
    """Stable 40-hex SHA-1 identity over (normalized text, doc_id, page)."""
    payload = _KEY_SEP.join((collapse_whitespace(text), doc_id, str(page)))
    return hashlib.sha1(payload.encode("utf-8")).hexdigest()


def tokenize_words(text: str) -> List[str]:
    """Whitespace word tokens used for chunk tiling."""
    return text.split()


def chunk_page(
    page: PageRecord,
    size_tokens: int = 1024,
    overlap_tokens: int = 128,
) -> List[Chunk]:
    """Tile a page into overlapping token windows.

    Windows start at 0, s, 2s, ... with stride s = size - overlap; the final
    window may be shorter. An empty page yields no chunks.
    """
    if not 0 <= overlap_tokens < size_tokens:
        raise ChunkConfigError(
            f"need 0 <= overlap ({overlap_tokens}) < size ({size_tokens})"
        )
    tokens = tokenize_words(page.text)
    if not tokens:
        return []
    stride = size_tokens - overlap_tokens
    chunks: List[Chunk] = []
    start = 0
    while True:
        end = min(start + size_tokens, len(tokens))
        text = " ".join(tokens[start:end])
        chunks.append(
            Chunk(
                chunk_key=chunk_key(text, page.doc_id, page.page),
                doc_id=page.doc_id,
                page=page.page,
                text=text,
                token_start=start,
                token_end=end,
            )
        )
        if end == len(tokens):
            return chunks
        start += stride


def chunk_corpus(
    corpus: Corpus,
    size_tokens: int = 1024,
    overlap_tokens: int = 128,
) -> List[Chunk]:
    out: List[Chunk] = []
    for page in corpus:
        out.extend(chunk_page(page, size_tokens, overlap_tokens))
    return out


def _parse_line(line: str, lineno: int, path: str) -> dict:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{lineno}: malformed JSON line: {exc}") from exc
    if not isinstance(obj, dict):
        raise ParseError(f"{path}:{lineno}: expected a JSON object")
    return obj


def load_corpus(path: str) -> Corpus:
    """Load a JSON Lines page file: one {doc_id, page, text, doc_type} per line."""
    corpus = Corpus()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            obj = _parse_line(line, lineno, path)
            try:
                record = PageRecord(
                    doc_id=str(obj["doc_id"]),
                    page=int(obj["page"]),
                    text=str(obj.get("text", "")),
                    doc_type=str(obj.get("doc_type", "OTHER")),
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"{path}:{lineno}: bad page record: {exc}") from exc
            corpus.add(record)
    if len(corpus) == 0:
        log.warning("corpus file %s contained no pages", path)
    return corpus


def load_samples(path: str) -> List[QASample]:
    """Load a JSON Lines QA annotation file."""
    samples: List[QASample] = []
    seen_qids: set = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            obj = _parse_line(line, lineno, path)
            try:
                sample = QASample(
                    qid=str(obj["qid"]),
                    question=str(obj["question"]),
                    answer=str(obj.get("answer", "")),
                    gold_doc=str(obj["gold_doc"]),
                    gold_pages=frozenset(int(p) for p in obj["gold_pages"]),
                    evidence_text=str(obj.get("evidence_text", "")),
                    question_type=str(obj.get("question_type", "DOMAIN")),
                    doc_type=str(obj.get("doc_type", "OTHER")),
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"{path}:{lineno}: bad QA record: {exc}") from exc
            if not sample.gold_pages:
                raise IntegrityError(f"{path}:{lineno}: gold_pages is empty")
            if sample.qid in seen_qids:
                raise IntegrityError(f"{path}:{lineno}: duplicate qid {sample.qid}")
            seen_qids.add(sample.qid)
            samples.append(sample)
    return samples


def save_corpus(corpus: Corpus, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in corpus:
            fh.write(
                json.dumps(
                    {
                        "doc_id": rec.doc_id,
                        "page": rec.page,
                        "text": rec.text,
                        "doc_type": rec.doc_type,
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def save_samples(samples: Sequence[QASample], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in samples:
            fh.write(
                json.dumps(
                    {
                        "qid": s.qid,
                        "question": s.question,
                        "answer": s.answer,
                        "gold_doc": s.gold_doc,
                        "gold_pages": sorted(s.gold_pages),
                        "evidence_text": s.evidence_text,
                        "question_type": s.question_type,
                        "doc_type": s.doc_type,
                    },
                    sort_keys=True,
                )
                + "\n"
            )
