"""Index construction: centroid training, token assignment, inverted lists,
and product-quantized residual encoding."""

from __future__ import annotations

import logging

import numpy as np

from .kmeans import kmeans
from .model import (
    PQ_CODEWORDS,
    CentroidIndex,
    CompressedCorpus,
    Index,
    PQCodebook,
    TokenEmbeddingCollection,
)

logger = logging.getLogger(__name__)

_CHUNK = 65536
MAX_PQ_TRAIN_SAMPLE = 1 << 20


def train_centroids(
    coll: TokenEmbeddingCollection,
    num_centroids: int,
    iters: int = 10,
    seed: int = 0,
) -> CentroidIndex:
    """Spherical k-means over all corpus tokens; inverted lists left empty.

    Centroids are renormalized to unit length after every Lloyd update so
    that query scoring can use plain dot products.
    """
    if coll.total_tokens == 0:
        raise ValueError("empty collection")
    if num_centroids > coll.total_tokens:
        raise ValueError(
            f"num_centroids {num_centroids} exceeds total tokens {coll.total_tokens}"
        )
    tokens, _ = coll.stacked()
    result = kmeans(tokens, num_centroids, iters=iters, seed=seed, spherical=True)
    return CentroidIndex(centroids=result.centroids, inverted_lists=[])


def assign_tokens(
    coll: TokenEmbeddingCollection, centroids: np.ndarray
) -> np.ndarray:
    """Map every token to its maximum-dot-product centroid id (uint32).

    Ties break toward the lower centroid id. For unit vectors this matches
    nearest-neighbor assignment under L2.
    """
    tokens, _ = coll.stacked()
    if tokens.shape[1] != centroids.shape[1]:
        raise ValueError(
            f"token dim {tokens.shape[1]} != centroid dim {centroids.shape[1]}"
        )
    out = np.empty(tokens.shape[0], dtype=np.uint32)
    for lo in range(0, tokens.shape[0], _CHUNK):
        hi = min(lo + _CHUNK, tokens.shape[0])
        out[lo:hi] = np.argmax(tokens[lo:hi] @ centroids.T, axis=1).astype(np.uint32)
    return out


def build_inverted_lists(
    assignments: np.ndarray,
    passage_offsets: np.ndarray,
    num_centroids: int,
) -> list[np.ndarray]:
    """Per-centroid sorted, deduplicated passage-id lists."""
    n_passages = passage_offsets.shape[0] - 1
    counts = np.diff(passage_offsets.astype(np.int64))
    token_pids = np.repeat(np.arange(n_passages, dtype=np.int64), counts)
    pairs = np.stack(
        [assignments.astype(np.int64), token_pids], axis=1
    )
    uniq = np.unique(pairs, axis=0)
    split_at = np.searchsorted(uniq[:, 0], np.arange(num_centroids + 1))
    return [
        uniq[split_at[c] : split_at[c + 1], 1].astype(np.uint32)
        for c in range(num_centroids)
    ]


def train_pq(
    residuals: np.ndarray,
    m: int,
    seed: int = 0,
    iters: int = 10,
    rotation: np.ndarray | None = None,
) -> PQCodebook:
    """Train one 256-codeword k-means codebook per residual sub-space.

    Rotation, when given, is applied to the residuals before splitting and
    stored on the codebook. Fewer than 256 training residuals are padded by
    sampling with replacement.
    """
    residuals = np.ascontiguousarray(residuals, dtype=np.float32)
    d = residuals.shape[1]
    if d % m != 0:
        raise ValueError(f"dim {d} not divisible by m {m}")
    sub = d // m
    if rotation is not None:
        residuals = residuals @ np.asarray(rotation, dtype=np.float32)
    if residuals.shape[0] < PQ_CODEWORDS:
        rng = np.random.default_rng(seed)
        pad = rng.integers(0, residuals.shape[0], PQ_CODEWORDS - residuals.shape[0])
        residuals = np.concatenate([residuals, residuals[pad]], axis=0)
    codewords = np.empty((m, PQ_CODEWORDS, sub), dtype=np.float32)
    for s in range(m):
        block = residuals[:, s * sub : (s + 1) * sub]
        result = kmeans(block, PQ_CODEWORDS, iters=iters, seed=seed + s)
        codewords[s] = result.centroids
    return PQCodebook(codewords=codewords, rotation=rotation)


def encode_residuals(
    coll: TokenEmbeddingCollection,
    centroids: np.ndarray,
    assignments: np.ndarray,
    pq: PQCodebook,
) -> np.ndarray:
    """Encode every token residual as m uint8 nearest-codeword ids."""
    tokens, _ = coll.stacked()
    residuals = tokens - centroids[assignments]
    return encode_vectors(residuals, pq)


def encode_vectors(vectors: np.ndarray, pq: PQCodebook) -> np.ndarray:
    """PQ-encode raw vectors: rotate, split, pick nearest codeword per sub-space."""
    vectors = pq.rotate(np.ascontiguousarray(vectors, dtype=np.float32))
    n = vectors.shape[0]
    m, sub = pq.m, pq.sub_dim
    codes = np.empty((n, m), dtype=np.uint8)
    cw_sq = np.einsum("mcs,mcs->mc", pq.codewords, pq.codewords)
    for lo in range(0, n, _CHUNK):
        hi = min(lo + _CHUNK, n)
        block = vectors[lo:hi].reshape(hi - lo, m, sub)
        for s in range(m):
            # argmin ||r - c||^2 == argmin (||c||^2 - 2 r.c); ties -> lower id
            scores = cw_sq[s] - 2.0 * (block[:, s, :] @ pq.codewords[s].T)
            codes[lo:hi, s] = np.argmin(scores, axis=1).astype(np.uint8)
    return codes


def build_index(
    coll: TokenEmbeddingCollection,
    num_centroids: int,
    m: int,
    iters: int = 10,
    seed: int = 0,
    rotation: np.ndarray | None = None,
    pq_iters: int | None = None,
    pq_train_sample: int = MAX_PQ_TRAIN_SAMPLE,
) -> Index:
    """Full build: centroids, assignments, inverted lists, PQ codes."""
    logger.info(
        "building index: %d passages, %d tokens, %d centroids, m=%d",
        coll.num_passages,
        coll.total_tokens,
        num_centroids,
        m,
    )
    ci = train_centroids(coll, num_centroids, iters=iters, seed=seed)
    assignments = assign_tokens(coll, ci.centroids)
    tokens, offsets = coll.stacked()
    ci.inverted_lists = build_inverted_lists(assignments, offsets, num_centroids)

    residuals = tokens - ci.centroids[assignments]
    sample = residuals
    cap = min(pq_train_sample, MAX_PQ_TRAIN_SAMPLE)
    if residuals.shape[0] > cap:
        rng = np.random.default_rng(seed)
        pick = rng.choice(residuals.shape[0], size=cap, replace=False)
        sample = residuals[pick]
    pq = train_pq(
        sample, m, seed=seed, iters=pq_iters if pq_iters is not None else iters,
        rotation=rotation,
    )
    codes = encode_vectors(residuals, pq)
    corpus = CompressedCorpus(
        token_centroid_ids=assignments,
        pq_codes=codes,
        passage_offsets=offsets,
        pq=pq,
    )
    return Index(centroid_index=ci, corpus=corpus)
