"""Retrieval and generation evaluation metrics with macro aggregation."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Set

from .corpus import QASample
from .lexical import finance_tokenize
from .results import RankedList

# Applied after commas and currency symbols are removed; '%' is stripped
# before parsing, so "5%" reads as 5.0.
_NUMBER_RE = re.compile(r"-?\d+(?:\.\d+)?")
_STRIP_RE = re.compile(r"[,$€£%]")


def doc_recall(retrieved: RankedList, gold_doc: str, k: int) -> int:
    """1 iff the gold document appears among the first k entries."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return int(any(e.doc_id == gold_doc for e in retrieved.entries[:k]))


def page_recall(
    retrieved: RankedList, gold_doc: str, gold_pages: Set[int], k: int
) -> float:
    """Fraction of gold pages covered by top-k entries from the gold document."""
    if not gold_pages:
        raise ValueError("gold_pages must be nonempty")
    hit = {e.page for e in retrieved.entries[:k] if e.doc_id == gold_doc}
    return len(set(gold_pages) & hit) / len(gold_pages)


def _lcs_len(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: str, reference: str) -> float:
    """LCS F1 over finance tokens; 0 when either side has no tokens."""
    cand = finance_tokenize(candidate)
    ref = finance_tokenize(reference)
    if not cand or not ref:
        return 0.0
    lcs = _lcs_len(cand, ref)
    if lcs == 0:
        return 0.0
    precision = lcs / len(cand)
    recall = lcs / len(ref)
    return 2 * precision * recall / (precision + recall)


def _ngram_counts(tokens: Sequence[str], n: int) -> Dict[tuple, int]:
    counts: Dict[tuple, int] = {}
    for i in range(len(tokens) - n + 1):
        gram = tuple(tokens[i : i + n])
        counts[gram] = counts.get(gram, 0) + 1
    return counts


def bleu(candidate: str, reference: str, max_n: int = 4) -> float:
    """Sentence BLEU with uniform weights up to max_n and add-one smoothing
    on any n-gram order with zero matches; standard brevity penalty.

    Orders longer than the candidate are skipped (weights stay uniform over
    the orders actually used). Empty candidate scores 0.
    """
    cand = finance_tokenize(candidate)
    ref = finance_tokenize(reference)
    if not cand or not ref:
        return 0.0
    log_precisions: List[float] = []
    for n in range(1, max_n + 1):
        total = len(cand) - n + 1
        if total <= 0:
            break
        cand_counts = _ngram_counts(cand, n)
        ref_counts = _ngram_counts(ref, n)
        matches = sum(min(c, ref_counts.get(g, 0)) for g, c in cand_counts.items())
        if matches == 0:
            precision = (matches + 1) / (total + 1)
        else:
            precision = matches / total
        log_precisions.append(math.log(precision))
    if not log_precisions:
        return 0.0
    geo_mean = math.exp(sum(log_precisions) / len(log_precisions))
    bp = 1.0 if len(cand) >= len(ref) else math.exp(1.0 - len(ref) / len(cand))
    return bp * geo_mean


def ctx_max(
    retrieved: RankedList,
    evidence: str,
    k: int,
    metric: Callable[[str, str], float] = rouge_l,
) -> float:
    """Max metric(chunk text, evidence) over the first k retrieved chunks."""
    best = 0.0
    for entry in retrieved.entries[:k]:
        best = max(best, metric(entry.text, evidence))
    return best


def extract_numbers(text: str) -> Set[float]:
    """Signed decimal literals after removing commas, currency symbols, and %."""
    cleaned = _STRIP_RE.sub("", text)
    return {float(m) for m in _NUMBER_RE.findall(cleaned)}


def numeric_match(
    reference: str, prediction: str, atol: float = 0.03, rtol: float = 0.03
) -> int:
    """1 iff some predicted number is close to some reference number,
    |p - r| <= atol + rtol * |r| with the reference as comparison base."""
    refs = extract_numbers(reference)
    preds = extract_numbers(prediction)
    for r in refs:
        for p in preds:
            if abs(p - r) <= atol + rtol * abs(r):
                return 1
    return 0


@dataclass
class QueryEval:
    qid: str
    doc_rec: int
    page_rec: float
    ctx_bleu: float
    ctx_rouge_l: float
    numeric_match: Optional[int] = None
    gen_rouge_l: Optional[float] = None


@dataclass
class EvalReport:
    overall: Dict[str, float]
    by_question_type: Dict[str, Dict[str, float]]
    by_doc_type: Dict[str, Dict[str, float]]
    group_counts: Dict[str, int]
    n: int
    metadata: Dict[str, object] = field(default_factory=dict)


def evaluate_query(retrieved: RankedList, sample: QASample, k: int) -> QueryEval:
    """Retrieval-side metrics for one query (generation fields filled later)."""
    return QueryEval(
        qid=sample.qid,
        doc_rec=doc_recall(retrieved, sample.gold_doc, k),
        page_rec=page_recall(retrieved, sample.gold_doc, set(sample.gold_pages), k),
        ctx_bleu=ctx_max(retrieved, sample.evidence_text, k, metric=bleu),
        ctx_rouge_l=ctx_max(retrieved, sample.evidence_text, k, metric=rouge_l),
    )


def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values) if values else 0.0


def _summarize(evals: Sequence[QueryEval]) -> Dict[str, float]:
    out = {
        "doc_rec": _mean([e.doc_rec for e in evals]),
        "page_rec": _mean([e.page_rec for e in evals]),
        "ctx_bleu": _mean([e.ctx_bleu for e in evals]),
        "ctx_rouge_l": _mean([e.ctx_rouge_l for e in evals]),
    }
    numeric = [e.numeric_match for e in evals if e.numeric_match is not None]
    if numeric:
        out["numeric_match"] = _mean(numeric)
    gen = [e.gen_rouge_l for e in evals if e.gen_rouge_l is not None]
    if gen:
        out["gen_rouge_l"] = _mean(gen)
    return out


def aggregate(per_query: Sequence[QueryEval], samples: Sequence[QASample]) -> EvalReport:
    """Macro averages overall plus question-type and doc-type breakdowns.

    Numeric match is averaged only over METRICS-type questions.
    """
    by_qid = {e.qid: e for e in per_query}
    missing = [s.qid for s in samples if s.qid not in by_qid]
    if missing:
        raise ValueError(f"missing evaluations for qids: {missing}")

    # numeric match only counts for METRICS questions
    for s in samples:
        if s.question_type != "METRICS":
            by_qid[s.qid].numeric_match = None

    ordered = [by_qid[s.qid] for s in samples]
    q_groups: Dict[str, List[QueryEval]] = {}
    d_groups: Dict[str, List[QueryEval]] = {}
    for s in samples:
        q_groups.setdefault(s.question_type, []).append(by_qid[s.qid])
        d_groups.setdefault(s.doc_type, []).append(by_qid[s.qid])

    counts = {f"question_type:{k}": len(v) for k, v in q_groups.items()}
    counts.update({f"doc_type:{k}": len(v) for k, v in d_groups.items()})
    return EvalReport(
        overall=_summarize(ordered),
        by_question_type={k: _summarize(v) for k, v in sorted(q_groups.items())},
        by_doc_type={k: _summarize(v) for k, v in sorted(d_groups.items())},
        group_counts=dict(sorted(counts.items())),
        n=len(samples),
    )
