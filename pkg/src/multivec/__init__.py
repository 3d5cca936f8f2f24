"""Multi-vector late-interaction retrieval engine.

Consumes pre-computed token-level embeddings; provides index construction
(spherical k-means centroids, inverted lists, product-quantized residuals),
a four-phase query pipeline (candidate retrieval, bit-vector prefiltering,
centroid-approximated scoring, gated late interaction), retrieval metrics,
and kernel benchmarks.
"""

from .builder import (
    assign_tokens,
    build_index,
    build_inverted_lists,
    encode_residuals,
    train_centroids,
    train_pq,
)
from .engine import PhaseTimings, QueryStats, ScoreScratch, SearchEngine, SearchResult
from .metrics import mrr_at_k, recall_at_k, success_at_k
from .model import (
    CentroidIndex,
    CompressedCorpus,
    Index,
    PQCodebook,
    QueryMatrix,
    SearchConfig,
    TokenEmbeddingCollection,
    validate_collection,
)
from .storage import (
    load_embeddings,
    load_index,
    load_queries,
    save_index,
    write_embeddings,
)

__version__ = "0.1.0"

__all__ = [
    "CentroidIndex",
    "CompressedCorpus",
    "Index",
    "PQCodebook",
    "PhaseTimings",
    "QueryMatrix",
    "QueryStats",
    "ScoreScratch",
    "SearchConfig",
    "SearchEngine",
    "SearchResult",
    "TokenEmbeddingCollection",
    "assign_tokens",
    "build_index",
    "build_inverted_lists",
    "encode_residuals",
    "load_embeddings",
    "load_index",
    "load_queries",
    "mrr_at_k",
    "recall_at_k",
    "save_index",
    "success_at_k",
    "train_centroids",
    "train_pq",
    "validate_collection",
    "write_embeddings",
]
