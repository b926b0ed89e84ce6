"""Seeded synthetic corpus generator: desk-scale filings with planted gold
evidence and near-duplicate distractor pages across fiscal years."""

from __future__ import annotations

import random
from typing import List, Tuple

from .corpus import Corpus, PageRecord, QASample

# Shared across every page: mimics the repeated-template difficulty of real
# filings, where sections read almost identically across years.
_BOILERPLATE = (
    "the company reports the following consolidated financial information for "
    "the period presented in this filing including balance sheet items and "
    "statements of operations cash flows and notes prepared in accordance with "
    "generally accepted accounting principles and reviewed by independent auditors"
)

_METRIC_NAMES = ["total revenue", "operating income", "net cash", "gross margin"]
_DOC_TYPES = ["10K", "10K", "10K", "10Q", "8K", "EARNINGS"]
_QUESTION_TYPES = ["DOMAIN", "METRICS", "NOVEL"]

_BASE_YEAR = 2010


def build_synthetic(
    n_docs: int = 6,
    pages_per_doc: int = 10,
    n_questions: int = 20,
    seed: int = 0,
) -> Tuple[Corpus, List[QASample]]:
    """Build a corpus of `n_docs` filings, one fiscal year per page, plus QA
    samples whose questions use FY-style year tokens that never appear
    verbatim in page text (pages spell the year as plain digits)."""
    rng = random.Random(seed)
    corpus = Corpus()
    values = {}
    for d in range(n_docs):
        doc_id = f"company{d}_{_DOC_TYPES[d % len(_DOC_TYPES)]}"
        doc_type = _DOC_TYPES[d % len(_DOC_TYPES)]
        for p in range(pages_per_doc):
            year = _BASE_YEAR + p
            lines = []
            for metric in _METRIC_NAMES:
                value = round(rng.uniform(100.0, 9000.0), 1)
                values[(d, year, metric)] = value
                lines.append(f"{metric} for the year {year} was $ {value} million")
            text = (
                f"{_BOILERPLATE} company{d} annual results statement "
                + " ".join(lines)
            )
            corpus.add(PageRecord(doc_id=doc_id, page=p, text=text, doc_type=doc_type))

    samples: List[QASample] = []
    for i in range(n_questions):
        d = i % n_docs
        p = rng.randrange(pages_per_doc)
        year = _BASE_YEAR + p
        metric = _METRIC_NAMES[i % len(_METRIC_NAMES)]
        doc_id = f"company{d}_{_DOC_TYPES[d % len(_DOC_TYPES)]}"
        value = values[(d, year, metric)]
        question = f"What was {metric} for company{d} in FY{year % 100}?"
        evidence = f"{metric} for the year {year} was $ {value} million"
        samples.append(
            QASample(
                qid=f"q{i:04d}",
                question=question,
                answer=f"${value} million",
                gold_doc=doc_id,
                gold_pages=frozenset({p}),
                evidence_text=evidence,
                question_type=_QUESTION_TYPES[i % len(_QUESTION_TYPES)],
                doc_type=_DOC_TYPES[d % len(_DOC_TYPES)],
            )
        )
    return corpus, samples
