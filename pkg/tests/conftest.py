import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

from oracles import random_unit_rows

from multivec.model import QueryMatrix, TokenEmbeddingCollection

settings.register_profile("suite", deadline=None, max_examples=50)
settings.load_profile("suite")


def make_collection(n_passages, tokens_per_passage, dim, seed=0, ragged=False):
    """Random unit-vector corpus; ragged varies passage lengths."""
    rng = np.random.default_rng(seed)
    passages = []
    for _ in range(n_passages):
        n_t = tokens_per_passage
        if ragged:
            n_t = int(rng.integers(1, tokens_per_passage + 1))
        passages.append(random_unit_rows(rng, n_t, dim))
    return TokenEmbeddingCollection.from_passages(passages)


def make_query(dim, n_active, seed=0):
    rng = np.random.default_rng(seed)
    return QueryMatrix.from_embeddings(random_unit_rows(rng, n_active, dim))


@pytest.fixture(scope="session")
def small_collection():
    return make_collection(40, 5, 16, seed=11, ragged=True)


@pytest.fixture(scope="session")
def small_index(small_collection):
    from multivec.builder import build_index

    return build_index(small_collection, num_centroids=10, m=16, iters=3, seed=7, pq_iters=2)
