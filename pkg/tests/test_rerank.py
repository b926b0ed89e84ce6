import pytest

from pagerag.clients import CosineMockReranker
from pagerag.dense import HashingEmbedder, build_vector_index, dense_search
from pagerag.rerank import RerankError, rerank
from pagerag.results import RankedEntry, RankedList
from tests.test_dense import make_chunks


def make_candidates(n=6):
    entries = [
        RankedEntry(
            chunk_key=f"{i:040x}",
            doc_id="D",
            page=i,
            score=float(n - i),
            text=f"passage number {i}",
        )
        for i in range(n)
    ]
    return RankedList(entries, retriever="dense", qid="q1")


class ReversingScorer:
    model_id = "reverse"

    def score(self, query, passages):
        return list(range(len(passages)))  # last passage scores highest


class IdentityScorer:
    model_id = "identity"

    def score(self, query, passages):
        return list(range(len(passages), 0, -1))  # preserves the base order


class FailingScorer:
    model_id = "failing"

    def score(self, query, passages):
        raise ConnectionError("scorer down")


class TestRerank:
    def test_reversing_scorer_reverses(self):
        cands = make_candidates(5)
        result = rerank("q", cands, ReversingScorer(), k=5, n_candidates=5)
        assert [e.chunk_key for e in result] == [e.chunk_key for e in reversed(cands.entries)]

    def test_identity_scorer_truncates(self):
        cands = make_candidates(8)
        result = rerank("q", cands, IdentityScorer(), k=6, n_candidates=6)
        assert [e.chunk_key for e in result] == [e.chunk_key for e in cands.entries[:6]]

    def test_failure_is_error_not_fallback(self):
        with pytest.raises(RerankError):
            rerank("q", make_candidates(3), FailingScorer(), k=2, n_candidates=3)

    def test_empty_candidates_rejected(self):
        with pytest.raises(ValueError):
            rerank("q", RankedList(), IdentityScorer(), k=1)

    def test_k_exceeding_n_rejected(self):
        with pytest.raises(ValueError):
            rerank("q", make_candidates(3), IdentityScorer(), k=10, n_candidates=5)

    def test_output_subset_of_first_n(self):
        cands = make_candidates(10)
        result = rerank("q", cands, ReversingScorer(), k=3, n_candidates=5)
        pool = {e.chunk_key for e in cands.entries[:5]}
        assert len(result) == 3
        assert all(e.chunk_key in pool for e in result)

    def test_size_is_min_of_k_candidates_n(self):
        cands = make_candidates(4)
        assert len(rerank("q", cands, IdentityScorer(), k=10, n_candidates=10)) == 4

    def test_provenance_records_base_and_reranker(self):
        result = rerank("q", make_candidates(3), IdentityScorer(), k=2, n_candidates=3)
        assert result.retriever == "dense+rerank:identity"
        assert result.qid == "q1"

    def test_cosine_scorer_equals_dense_search(self):
        embedder = HashingEmbedder(256)
        texts = [
            "total revenue was $5.1 million",
            "net loss narrowed in 2020",
            "cash and equivalents were stable",
            "operating income rose 5%",
        ]
        chunks = make_chunks(texts)
        base = RankedList(
            [
                RankedEntry(c.chunk_key, c.doc_id, c.page, 1.0, c.text)
                for c in chunks
            ],
            retriever="dense",
        )
        query = "how did operating income change"
        reranked = rerank(query, base, CosineMockReranker(256), k=4, n_candidates=4)
        index = build_vector_index(chunks, embedder)
        expected = dense_search(index, embedder.embed_one(query), k=4)
        assert [e.chunk_key for e in reranked] == [e.chunk_key for e in expected]
        for a, b in zip(reranked, expected):
            assert a.score == pytest.approx(b.score)
