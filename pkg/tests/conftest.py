import pytest

from pagerag.corpus import Corpus, PageRecord
from pagerag.dense import HashingEmbedder
from pagerag.synth import build_synthetic


@pytest.fixture(scope="session")
def embedder():
    return HashingEmbedder(256)


@pytest.fixture(scope="session")
def synthetic():
    return build_synthetic(n_docs=6, pages_per_doc=10, n_questions=20, seed=0)


@pytest.fixture
def small_corpus():
    corpus = Corpus()
    corpus.add(PageRecord("A", 0, "cash flow from operations was strong this year", "10K"))
    corpus.add(PageRecord("A", 1, "total revenue was $ 742.6 million in 2020", "10K"))
    corpus.add(PageRecord("B", 0, "inventory levels rose while receivables fell", "10Q"))
    return corpus
