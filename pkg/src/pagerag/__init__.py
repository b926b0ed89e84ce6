"""Retrieval-failure decomposition toolkit for long-document financial QA:
page-level corpora, a retrieval-strategy matrix, oracle candidate restriction,
a trainable page scorer, and the full evaluation metric suite."""

__version__ = "0.1.0"

from .corpus import (
    Chunk,
    Corpus,
    PageRecord,
    QASample,
    chunk_corpus,
    chunk_key,
    chunk_page,
    collapse_whitespace,
    load_corpus,
    load_samples,
    normalize_page,
)
from .clients import (
    BridgeEmbedder,
    BridgeError,
    BridgeGenerator,
    BridgeReranker,
    BridgeSparseEncoder,
    CosineMockReranker,
    EchoGenerator,
    ExtractiveMockGenerator,
    MockSparseEncoder,
    bridge_health,
)
from .dense import HashingEmbedder, VectorIndex, build_vector_index, dense_search, sparse_search
from .fusion import rrf_fuse
from .harness import (
    RETRIEVERS,
    ExperimentResult,
    RunConfig,
    results_table_csv,
    results_table_markdown,
    run_experiment,
    sweep,
    sweep_table_csv,
)
from .hierarchy import build_parent_child, parent_child_search
from .lexical import bm25_build, bm25_search, finance_tokenize
from .metrics import (
    EvalReport,
    QueryEval,
    aggregate,
    bleu,
    ctx_max,
    doc_recall,
    extract_numbers,
    numeric_match,
    page_recall,
    rouge_l,
)
from .oracle import OracleMode, restrict
from .pagescorer import (
    Adapter,
    FoldPlan,
    TrainConfig,
    build_page_index,
    make_folds,
    make_pairs,
    mnr_loss,
    page_score,
    page_then_chunk,
    train_adapter,
)
from .reformulate import ExpansionTable, expand_query, hyde_vector, multi_hyde_vector
from .rerank import rerank
from .results import RankedEntry, RankedList
from .synth import build_synthetic

__all__ = [
    "Adapter",
    "BridgeEmbedder",
    "BridgeError",
    "BridgeGenerator",
    "BridgeReranker",
    "BridgeSparseEncoder",
    "Chunk",
    "Corpus",
    "CosineMockReranker",
    "EchoGenerator",
    "EvalReport",
    "ExperimentResult",
    "ExtractiveMockGenerator",
    "MockSparseEncoder",
    "RETRIEVERS",
    "RunConfig",
    "ExpansionTable",
    "FoldPlan",
    "HashingEmbedder",
    "OracleMode",
    "PageRecord",
    "QASample",
    "QueryEval",
    "RankedEntry",
    "RankedList",
    "TrainConfig",
    "VectorIndex",
    "aggregate",
    "bleu",
    "bm25_build",
    "bm25_search",
    "bridge_health",
    "build_page_index",
    "build_parent_child",
    "build_synthetic",
    "build_vector_index",
    "chunk_corpus",
    "chunk_key",
    "chunk_page",
    "collapse_whitespace",
    "ctx_max",
    "dense_search",
    "doc_recall",
    "expand_query",
    "extract_numbers",
    "finance_tokenize",
    "hyde_vector",
    "load_corpus",
    "load_samples",
    "make_folds",
    "make_pairs",
    "mnr_loss",
    "multi_hyde_vector",
    "normalize_page",
    "numeric_match",
    "page_recall",
    "page_score",
    "page_then_chunk",
    "parent_child_search",
    "rerank",
    "restrict",
    "results_table_csv",
    "results_table_markdown",
    "rouge_l",
    "rrf_fuse",
    "run_experiment",
    "sparse_search",
    "sweep",
    "sweep_table_csv",
    "train_adapter",
]
