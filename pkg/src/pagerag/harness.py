"""Experiment orchestration: index building, retrieval configurations,
oracle modes, generation, evaluation, parameter sweeps, and report tables."""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field, asdict
from typing import Dict, List, Optional, Sequence, Tuple

from . import __version__
from .clients import (
    CosineMockReranker,
    ExtractiveMockGenerator,
    GeneratorClient,
    MockSparseEncoder,
    RerankClient,
    SparseEncoderClient,
)
from .corpus import Chunk, Corpus, QASample, chunk_corpus
from .dense import (
    Embedder,
    HashingEmbedder,
    SparseVector,
    VectorIndex,
    build_vector_index,
    dense_search,
    sparse_search,
)
from .fusion import rrf_fuse
from .hierarchy import ParentChildMap, build_parent_child, parent_child_search
from .lexical import Bm25Index, bm25_build, bm25_search
from .metrics import (
    EvalReport,
    QueryEval,
    aggregate,
    evaluate_query,
    numeric_match,
    rouge_l,
)
from .oracle import OracleMode, make_filter, restrict
from .pagescorer import Adapter, build_page_index, page_then_chunk
from .reformulate import ExpansionTable, expand_query, hyde_vector, multi_hyde_vector
from .rerank import rerank
from .results import RankedEntry, RankedList

log = logging.getLogger(__name__)

RETRIEVERS = (
    "bm25",
    "dense",
    "sparse-learned",
    "hybrid-rrf",
    "expansion+dense",
    "hyde",
    "multi-hyde",
    "parent-child",
    "dense+reranker",
    "page-then-chunk",
)

PROMPT_TEMPLATE = (
    "You are a financial analyst assistant. Your task is to provide accurate, "
    "concise, and well-supported answers to questions based on provided financial "
    "document segments.\n"
    "\n"
    "Context:\n"
    "{retrieved_evidence}\n"
    "\n"
    "Question:\n"
    "{query}\n"
    "\n"
    "Answer:\n"
)

GENERATION_TEMPERATURE = 0.0
GENERATION_MAX_TOKENS = 512


@dataclass
class RunConfig:
    retriever: str = "dense"
    k: int = 5
    oracle_mode: OracleMode = OracleMode.STANDARD
    embedder_id: str = "hash-256"
    bridge_url: Optional[str] = None
    seed: int = 0
    top_pages: int = 20
    generate: bool = False
    rerank_candidates: int = 20
    multi_hyde_n: int = 4
    chunk_size: int = 1024
    chunk_overlap: int = 128
    child_size: int = 256
    child_overlap: int = 32
    parent_size: int = 1024
    page_max_chars: int = 2000
    rrf_k: int = 60
    rrf_pool: int = 50

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        base = self.retriever.removesuffix("+reranker")
        if base not in {r.removesuffix("+reranker") for r in RETRIEVERS}:
            raise ValueError(f"unknown retriever {self.retriever!r}")
        if isinstance(self.oracle_mode, str):
            self.oracle_mode = OracleMode(self.oracle_mode)

    def fingerprint(self) -> str:
        payload = asdict(self)
        payload["oracle_mode"] = self.oracle_mode.value
        return hashlib.sha1(
            json.dumps(payload, sort_keys=True).encode("utf-8")
        ).hexdigest()


@dataclass
class IndexBundle:
    chunks: List[Chunk]
    bm25: Bm25Index
    vectors: VectorIndex
    sparse_vectors: List[Tuple[str, SparseVector]]
    sparse_meta: Dict[str, Tuple[str, int, str]]
    pc_map: ParentChildMap
    child_vectors: VectorIndex
    page_index: VectorIndex


def build_indexes(
    corpus: Corpus,
    config: RunConfig,
    embedder: Embedder,
    sparse_encoder: SparseEncoderClient,
) -> IndexBundle:
    chunks = chunk_corpus(corpus, config.chunk_size, config.chunk_overlap)
    pc_map = build_parent_child(
        corpus, config.child_size, config.child_overlap, config.parent_size
    )
    sparse = sparse_encoder.encode([c.text for c in chunks])
    return IndexBundle(
        chunks=chunks,
        bm25=bm25_build(chunks),
        vectors=build_vector_index(chunks, embedder),
        sparse_vectors=[(c.chunk_key, v) for c, v in zip(chunks, sparse)],
        sparse_meta={c.chunk_key: (c.doc_id, c.page, c.text) for c in chunks},
        pc_map=pc_map,
        child_vectors=build_vector_index(pc_map.children, embedder),
        page_index=build_page_index(corpus, embedder, config.page_max_chars),
    )


def corpus_fingerprint(corpus: Corpus) -> str:
    digest = hashlib.sha1()
    for page in corpus:
        digest.update(f"{page.doc_id}\x1f{page.page}\x1f{page.text}\x1f{page.doc_type}\n".encode("utf-8"))
    return digest.hexdigest()


def retrieve_one(
    sample: QASample,
    config: RunConfig,
    indexes: IndexBundle,
    embedder: Embedder,
    generator: GeneratorClient,
    reranker: RerankClient,
    sparse_encoder: SparseEncoderClient,
    adapter: Optional[Adapter] = None,
    expansion_table: Optional[ExpansionTable] = None,
    run_meta: Optional[dict] = None,
) -> RankedList:
    """Run one retriever configuration for one query under the oracle mode."""
    flt = make_filter(config.oracle_mode, sample.gold_doc, sample.gold_pages)
    spec = config.retriever
    use_reranker = spec.endswith("+reranker") and spec != "dense+reranker"
    base = spec.removesuffix("+reranker") if use_reranker else spec
    k = config.k
    # Reranked runs over-retrieve N candidates from the base retriever.
    base_k = config.rerank_candidates if (use_reranker or base == "dense+reranker") else k

    if base == "bm25":
        result = _bm25_restricted(sample, config, indexes, base_k)
    elif base == "sparse-learned":
        result = _sparse_restricted(sample, config, indexes, sparse_encoder, base_k)
    elif base == "dense" or base == "dense+reranker":
        q_vec = embedder.embed([sample.question])[0]
        result = dense_search(indexes.vectors, q_vec, base_k, flt)
        if base == "dense+reranker":
            result = rerank(sample.question, result, reranker, k, config.rerank_candidates)
    elif base == "hybrid-rrf":
        lexical = _bm25_restricted(sample, config, indexes, config.rrf_pool)
        q_vec = embedder.embed([sample.question])[0]
        vector = dense_search(indexes.vectors, q_vec, config.rrf_pool, flt)
        result = rrf_fuse([lexical, vector], base_k, config.rrf_k)
    elif base == "expansion+dense":
        expanded = expand_query(sample.question, expansion_table)
        q_vec = embedder.embed([expanded])[0]
        result = dense_search(indexes.vectors, q_vec, base_k, flt)
        result = RankedList(result.entries, retriever="expansion+dense", qid=result.qid)
    elif base == "hyde":
        q_vec = hyde_vector(sample.question, generator, embedder, meta=run_meta)
        result = dense_search(indexes.vectors, q_vec, base_k, flt)
        result = RankedList(result.entries, retriever="hyde", qid=result.qid)
    elif base == "multi-hyde":
        q_vec = multi_hyde_vector(
            sample.question, generator, embedder, n=config.multi_hyde_n, meta=run_meta
        )
        result = dense_search(indexes.vectors, q_vec, base_k, flt)
        result = RankedList(result.entries, retriever="multi-hyde", qid=result.qid)
    elif base == "parent-child":
        q_vec = embedder.embed([sample.question])[0]
        result = _parent_child_restricted(q_vec, indexes, base_k, config, flt)
    elif base == "page-then-chunk":
        if adapter is None:
            adapter = Adapter.identity(embedder.dim, note="identity (untrained)")
        result = page_then_chunk(
            sample.question,
            indexes.page_index,
            adapter,
            indexes.vectors,
            embedder,
            top_pages=config.top_pages,
            k=base_k,
            flt=flt,
        )
    else:
        raise ValueError(f"unknown retriever {spec!r}")

    if use_reranker and base not in ("dense+reranker",):
        result = rerank(sample.question, result, reranker, k, config.rerank_candidates)
    result = result.top(k)
    result.qid = sample.qid
    return result


def _bm25_restricted(
    sample: QASample, config: RunConfig, indexes: IndexBundle, k: int
) -> RankedList:
    # BM25 statistics depend on the candidate pool, so oracle modes rebuild
    # the index over the restricted chunk set rather than filtering output.
    if config.oracle_mode is OracleMode.STANDARD:
        return bm25_search(indexes.bm25, sample.question, k)
    kept = restrict(indexes.chunks, config.oracle_mode, sample.gold_doc, sample.gold_pages)
    return bm25_search(bm25_build(kept, indexes.bm25.k1, indexes.bm25.b), sample.question, k)


def _sparse_restricted(
    sample: QASample,
    config: RunConfig,
    indexes: IndexBundle,
    sparse_encoder: SparseEncoderClient,
    k: int,
) -> RankedList:
    flt = make_filter(config.oracle_mode, sample.gold_doc, sample.gold_pages)
    vectors = [
        (key, vec)
        for key, vec in indexes.sparse_vectors
        if flt(indexes.sparse_meta[key][0], indexes.sparse_meta[key][1])
    ]
    query_vec = sparse_encoder.encode([sample.question])[0]
    return sparse_search(vectors, query_vec, k, meta=indexes.sparse_meta)


def _parent_child_restricted(q_vec, indexes, k, config, flt) -> RankedList:
    if config.oracle_mode is OracleMode.STANDARD:
        return parent_child_search(q_vec, indexes.child_vectors, indexes.pc_map, k)
    hits = dense_search(indexes.child_vectors, q_vec, k * 4, flt)
    best: Dict[str, float] = {}
    for entry in hits.entries:
        parent_id = indexes.pc_map.child_to_parent[entry.chunk_key]
        if parent_id not in best or entry.score > best[parent_id]:
            best[parent_id] = entry.score
    entries = [
        RankedEntry(
            chunk_key=indexes.pc_map.parents[pid].chunk_key,
            doc_id=indexes.pc_map.parents[pid].doc_id,
            page=indexes.pc_map.parents[pid].page,
            score=score,
            text=indexes.pc_map.parents[pid].text,
        )
        for pid, score in best.items()
    ]
    entries.sort(key=lambda e: (-e.score, e.chunk_key))
    return RankedList(entries[:k], retriever="parent-child")


def generate_answer(q: str, chunks: RankedList, llm: GeneratorClient) -> str:
    """Assemble the fixed analyst prompt and call the generator.

    Chunk texts join with a blank line in rank order; the query slot always
    receives the original, unexpanded question.
    """
    evidence = "\n\n".join(entry.text for entry in chunks.entries)
    prompt = PROMPT_TEMPLATE.format(retrieved_evidence=evidence, query=q)
    return llm.generate(
        prompt, temperature=GENERATION_TEMPERATURE, max_tokens=GENERATION_MAX_TOKENS
    )


@dataclass
class ExperimentResult:
    results: Dict[str, RankedList]
    report: EvalReport
    answers: Dict[str, Optional[str]] = field(default_factory=dict)


def run_experiment(
    config: RunConfig,
    corpus: Corpus,
    samples: Sequence[QASample],
    embedder: Optional[Embedder] = None,
    generator: Optional[GeneratorClient] = None,
    reranker: Optional[RerankClient] = None,
    sparse_encoder: Optional[SparseEncoderClient] = None,
    adapter: Optional[Adapter] = None,
    expansion_table: Optional[ExpansionTable] = None,
    indexes: Optional[IndexBundle] = None,
) -> ExperimentResult:
    """Retrieve, optionally generate, and evaluate every sample.

    Deterministic given the seed and deterministic clients; clients default
    to the built-in mocks so the full pipeline runs offline.
    """
    embedder = embedder or HashingEmbedder()
    generator = generator or ExtractiveMockGenerator()
    reranker = reranker or CosineMockReranker()
    sparse_encoder = sparse_encoder or MockSparseEncoder()
    if indexes is None:
        indexes = build_indexes(corpus, config, embedder, sparse_encoder)

    run_meta: Dict[str, object] = {
        "config_hash": config.fingerprint(),
        "corpus_hash": corpus_fingerprint(corpus),
        "retriever": config.retriever,
        "k": config.k,
        "oracle_mode": config.oracle_mode.value,
        "embedder_id": getattr(embedder, "embedder_id", ""),
        "seed": config.seed,
        "top_pages": config.top_pages,
        "version": __version__,
        "generation": {
            "temperature": GENERATION_TEMPERATURE,
            "max_tokens": GENERATION_MAX_TOKENS,
        },
    }
    if adapter is not None:
        run_meta["adapter"] = adapter.metadata

    results: Dict[str, RankedList] = {}
    answers: Dict[str, Optional[str]] = {}
    per_query: List[QueryEval] = []
    failures = 0
    for sample in samples:
        retrieved = retrieve_one(
            sample,
            config,
            indexes,
            embedder,
            generator,
            reranker,
            sparse_encoder,
            adapter=adapter,
            expansion_table=expansion_table,
            run_meta=run_meta,
        )
        results[sample.qid] = retrieved
        evaluation = evaluate_query(retrieved, sample, config.k)
        if config.generate:
            try:
                answer = generate_answer(sample.question, retrieved, generator)
            except Exception as exc:
                log.warning("generation failed for %s: %s", sample.qid, exc)
                answer, failures = None, failures + 1
            answers[sample.qid] = answer
            evaluation.gen_rouge_l = rouge_l(answer, sample.answer) if answer else 0.0
            if sample.question_type == "METRICS":
                evaluation.numeric_match = (
                    numeric_match(sample.answer, answer) if answer else 0
                )
        per_query.append(evaluation)

    report = aggregate(per_query, samples)
    if config.generate:
        run_meta["generation_failures"] = failures
    report.metadata = run_meta
    return ExperimentResult(results=results, report=report, answers=answers)


def sweep(
    config: RunConfig,
    parameter: str,
    values: Sequence[int],
    corpus: Corpus,
    samples: Sequence[QASample],
    **clients,
) -> List[Tuple[int, EvalReport]]:
    """Re-run the experiment for each parameter value, sharing built indexes."""
    if parameter not in ("P", "k"):
        raise ValueError("sweep parameter must be 'P' or 'k'")
    if not values:
        raise ValueError("sweep values must be nonempty")
    embedder = clients.get("embedder") or HashingEmbedder()
    sparse_encoder = clients.get("sparse_encoder") or MockSparseEncoder()
    clients["embedder"] = embedder
    clients["sparse_encoder"] = sparse_encoder
    indexes = clients.pop("indexes", None) or build_indexes(
        corpus, config, embedder, sparse_encoder
    )
    rows: List[Tuple[int, EvalReport]] = []
    for value in values:
        payload = asdict(config)
        payload["oracle_mode"] = config.oracle_mode
        payload["top_pages" if parameter == "P" else "k"] = value
        run_cfg = RunConfig(**payload)
        result = run_experiment(run_cfg, corpus, samples, indexes=indexes, **clients)
        rows.append((value, result.report))
    return rows


# --- report emission -------------------------------------------------------

_METRIC_KEYS = ("doc_rec", "page_rec", "ctx_bleu", "ctx_rouge_l")


def _columns(k: int, numeric: bool) -> List[str]:
    cols = [f"DocRec@{k}", f"PageRec@{k}", f"MaxBLEU@{k}", f"MaxROUGE-L@{k}"]
    if numeric:
        cols.append("NumericMatch")
    return cols


def _row_values(report: EvalReport, numeric: bool) -> List[str]:
    vals = [f"{report.overall[key]:.4f}" for key in _METRIC_KEYS]
    if numeric:
        vals.append(f"{report.overall.get('numeric_match', 0.0):.4f}")
    return vals


def results_table_csv(
    rows: Sequence[Tuple[str, EvalReport]],
    k: int,
    label: str = "Method",
    numeric: bool = False,
) -> str:
    """Main-results layout: one row per method (oracle table adds NumericMatch)."""
    lines = [",".join([label] + _columns(k, numeric))]
    for name, report in rows:
        lines.append(",".join([name] + _row_values(report, numeric)))
    return "\n".join(lines) + "\n"


def results_table_markdown(
    rows: Sequence[Tuple[str, EvalReport]],
    k: int,
    label: str = "Method",
    numeric: bool = False,
) -> str:
    cols = [label] + _columns(k, numeric)
    lines = ["| " + " | ".join(cols) + " |", "|" + "---|" * len(cols)]
    for name, report in rows:
        lines.append("| " + " | ".join([name] + _row_values(report, numeric)) + " |")
    return "\n".join(lines) + "\n"


def sweep_table_csv(rows: Sequence[Tuple[int, EvalReport]], k: int) -> str:
    """Page-count ablation layout: one row per P value."""
    lines = [",".join(["P"] + _columns(k, numeric=False))]
    for value, report in rows:
        lines.append(",".join([str(value)] + _row_values(report, numeric=False)))
    return "\n".join(lines) + "\n"


def breakdown_table_csv(report: EvalReport, group: str, k: int) -> str:
    """Per-group doc/page recall, one row per question type or filing type."""
    groups = report.by_question_type if group == "question_type" else report.by_doc_type
    lines = [f"group,n,DocRec@{k},PageRec@{k}"]
    for name, stats in groups.items():
        n = report.group_counts.get(f"{group}:{name}", 0)
        lines.append(f"{name},{n},{stats['doc_rec']:.4f},{stats['page_rec']:.4f}")
    return "\n".join(lines) + "\n"


def generation_table_csv(rows: Sequence[Tuple[str, EvalReport]]) -> str:
    """Generation-quality layout: answer ROUGE-L and numeric match per method."""
    lines = ["Method,ROUGE-L,NumericMatch"]
    for name, report in rows:
        lines.append(
            f"{name},{report.overall.get('gen_rouge_l', 0.0):.4f},"
            f"{report.overall.get('numeric_match', 0.0):.4f}"
        )
    return "\n".join(lines) + "\n"


def overlap_gap_csv(rows: Sequence[Tuple[str, EvalReport]], k: int) -> str:
    """Grouped-bar data: max BLEU/ROUGE-L per retrieval setting."""
    lines = [f"setting,MaxBLEU@{k},MaxROUGE-L@{k}"]
    for name, report in rows:
        lines.append(
            f"{name},{report.overall['ctx_bleu']:.4f},{report.overall['ctx_rouge_l']:.4f}"
        )
    return "\n".join(lines) + "\n"


def save_results(results: Dict[str, RankedList], path: str) -> None:
    """Persist per-query ranked lists as JSON Lines so evaluation and
    generation can re-run without re-retrieval."""
    with open(path, "w", encoding="utf-8") as fh:
        for qid in sorted(results):
            lst = results[qid]
            fh.write(
                json.dumps(
                    {
                        "qid": qid,
                        "retriever": lst.retriever,
                        "entries": [
                            {
                                "chunk_key": e.chunk_key,
                                "doc_id": e.doc_id,
                                "page": e.page,
                                "score": round(e.score, 12),
                                "text": e.text,
                            }
                            for e in lst.entries
                        ],
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def load_results(path: str) -> Dict[str, RankedList]:
    results: Dict[str, RankedList] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            entries = [
                RankedEntry(
                    chunk_key=e["chunk_key"],
                    doc_id=e["doc_id"],
                    page=int(e["page"]),
                    score=float(e["score"]),
                    text=e.get("text", ""),
                )
                for e in row["entries"]
            ]
            results[row["qid"]] = RankedList(
                entries, retriever=row.get("retriever", ""), qid=row["qid"]
            )
    return results


def load_config_file(path: str) -> Dict[str, str]:
    """Flat key = value config file; '#' starts a comment."""
    out: Dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out
