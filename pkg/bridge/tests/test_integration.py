"""End-to-end: the retrieval library runs against the live bridge."""

from pagerag.clients import (
    BridgeEmbedder,
    BridgeGenerator,
    BridgeReranker,
    BridgeSparseEncoder,
    bridge_health,
)
from pagerag.harness import RunConfig, run_experiment
from pagerag.synth import build_synthetic


class TestHydeRerankGenerateRun:
    def test_three_query_run_completes_with_model_ids(self, live_bridge):
        corpus, samples = build_synthetic(n_docs=3, pages_per_doc=6, n_questions=3, seed=1)
        health = bridge_health(live_bridge)
        embedder = BridgeEmbedder(live_bridge, dim=int(health["dim"]))
        generator = BridgeGenerator(live_bridge)
        reranker = BridgeReranker(live_bridge)
        sparse = BridgeSparseEncoder(live_bridge)

        config = RunConfig(retriever="hyde+reranker", k=5, generate=True, seed=0)
        result = run_experiment(
            config,
            corpus,
            samples,
            embedder=embedder,
            generator=generator,
            reranker=reranker,
            sparse_encoder=sparse,
        )

        assert len(result.results) == 3
        assert all(len(r) <= 5 for r in result.results.values())
        assert all(isinstance(a, str) and a for a in result.answers.values())
        # model ids echoed by every endpoint end up on the clients
        assert embedder.embedder_id.startswith("bridge:")
        assert generator.model_id == health["models"]["generator"]
        assert reranker.model_id == health["models"]["reranker"]
