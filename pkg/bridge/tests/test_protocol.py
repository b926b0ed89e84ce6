"""Protocol-conformance suite.

The same contract checks run against two client bundles: the in-process
mocks the retrieval library uses offline, and real HTTP clients talking to
a live service. Passing both proves the service is a drop-in replacement.
"""

import random

import numpy as np
import pytest

from pagerag.clients import (
    BridgeEmbedder,
    BridgeGenerator,
    BridgeReranker,
    BridgeSparseEncoder,
    CosineMockReranker,
    ExtractiveMockGenerator,
    MockSparseEncoder,
)
from pagerag.dense import HashingEmbedder

_WORDS = "revenue income total net cash fiscal margin assets equity liabilities".split()


def _random_texts(n, seed=0):
    rng = random.Random(seed)
    return [" ".join(rng.choices(_WORDS, k=rng.randint(3, 12))) for _ in range(n)]


@pytest.fixture(params=["mock", "http"])
def clients(request, live_bridge):
    if request.param == "mock":
        return {
            "embedder": HashingEmbedder(256),
            "sparse": MockSparseEncoder(),
            "reranker": CosineMockReranker(256),
            "generator": ExtractiveMockGenerator(),
        }
    return {
        "embedder": BridgeEmbedder(live_bridge, dim=256),
        "sparse": BridgeSparseEncoder(live_bridge),
        "reranker": BridgeReranker(live_bridge),
        "generator": BridgeGenerator(live_bridge),
    }


class TestEmbedContract:
    def test_unit_norms_on_20_random_texts(self, clients):
        vectors = clients["embedder"].embed(_random_texts(20))
        norms = np.linalg.norm(vectors, axis=1)
        assert np.all(np.abs(norms - 1.0) <= 1e-6)

    def test_identical_inputs_identical_vectors(self, clients):
        vectors = clients["embedder"].embed(["a", "a"])
        assert np.array_equal(vectors[0], vectors[1])

    def test_declared_dim(self, clients):
        assert clients["embedder"].embed(["total revenue"]).shape == (1, 256)


class TestSparseContract:
    def test_arity_and_term_cap(self, clients):
        long_text = " ".join(f"w{c}{d}" for c in "abcdefghij" for d in "abcdefghij")
        vectors = clients["sparse"].encode(["net income", long_text, ""])
        assert len(vectors) == 3
        for vec in vectors:
            assert len(vec) <= 256
            assert all(isinstance(t, str) and w > 0 for t, w in vec.items())

    def test_deterministic(self, clients):
        a = clients["sparse"].encode(["total cash and equivalents"])
        b = clients["sparse"].encode(["total cash and equivalents"])
        assert a == b


class TestRerankContract:
    def test_three_passages_three_scores(self, clients):
        scores = clients["reranker"].score(
            "what was revenue", ["revenue was $5", "weather report", "net income fell"]
        )
        assert len(scores) == 3
        assert all(isinstance(s, float) for s in scores)

    def test_relevant_passage_scores_highest(self, clients):
        scores = clients["reranker"].score(
            "total revenue fiscal 2013",
            ["total revenue fiscal 2013 was $10", "unrelated equity text here"],
        )
        assert scores[0] > scores[1]


class TestGenerateContract:
    def test_returns_text_honoring_max_tokens(self, clients):
        prompt = (
            "Context:\nrevenue was " + "very " * 50 + "high\n\n"
            "Question:\nwhat was revenue\n\nAnswer:"
        )
        out = clients["generator"].generate(prompt, temperature=0.0, max_tokens=8)
        assert isinstance(out, str)
        assert len(out.split()) <= 8

    def test_deterministic_at_zero_temperature(self, clients):
        prompt = "Context:\nnet income was $3\n\nQuestion:\nnet income?\n\nAnswer:"
        a = clients["generator"].generate(prompt, 0.0, 64)
        b = clients["generator"].generate(prompt, 0.0, 64)
        assert a == b


class TestModelIds:
    def test_every_client_reports_a_model_id(self, clients):
        clients["embedder"].embed(["x"])
        clients["sparse"].encode(["x"])
        clients["reranker"].score("q", ["p"])
        clients["generator"].generate("Context:\nx\n\nQuestion:\nq\n\nAnswer:", 0.0, 8)
        assert getattr(clients["embedder"], "embedder_id", "")
        assert clients["sparse"].model_id
        assert clients["reranker"].model_id
        assert clients["generator"].model_id
