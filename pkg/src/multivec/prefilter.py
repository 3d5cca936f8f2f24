"""Candidate prefiltering via stacked bit vectors.

One 32-bit word per centroid, bit i set iff that centroid scores above th
for query term i. A passage is then scored by OR-ing the words of its
tokens' centroids and popcounting the result: the count of query terms
with at least one close token. OR (not XOR) keeps repeated hits idempotent
so the existential count is exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import QUERY_SLOTS, CompressedCorpus
from .select import select_above_threshold

_POP16: np.ndarray | None = None


def _popcount_table() -> np.ndarray:
    global _POP16
    if _POP16 is None:
        counts = np.zeros(1 << 16, dtype=np.uint8)
        for shift in range(16):
            counts += (np.arange(1 << 16, dtype=np.uint32) >> shift).astype(np.uint8) & 1
        _POP16 = counts
    return _POP16


def popcount_u32(words: np.ndarray) -> np.ndarray:
    table = _popcount_table()
    words = words.astype(np.uint32, copy=False)
    return (
        table[words & np.uint32(0xFFFF)].astype(np.int64)
        + table[words >> np.uint32(16)]
    )


@dataclass
class StackedBitVectors:
    """words[c] bit i == 1 iff centroid c is in term i's close set."""

    words: np.ndarray

    @property
    def num_centroids(self) -> int:
        return int(self.words.shape[0])

    def term_close_set(self, i: int) -> np.ndarray:
        """Centroid ids in term i's close set (mainly for tests/debugging)."""
        return np.flatnonzero((self.words >> np.uint32(i)) & np.uint32(1))


def build_stacked_bitvectors(
    cs: np.ndarray,
    th: float,
    active_mask: np.ndarray,
    survivors: list[np.ndarray] | None = None,
    out_words: np.ndarray | None = None,
) -> StackedBitVectors:
    """Build the per-centroid term-membership words from the score matrix.

    ``survivors`` lets the caller reuse the per-term index lists already
    produced for top-nprobe extraction; rows of inactive terms contribute
    no bits either way.
    """
    n_terms, n_centroids = cs.shape
    if n_terms != QUERY_SLOTS:
        raise ValueError(f"score matrix must have {QUERY_SLOTS} rows, got {n_terms}")
    if out_words is None:
        words = np.zeros(n_centroids, dtype=np.uint32)
    else:
        words = out_words
        words[:] = 0
    for i in range(n_terms):
        if not active_mask[i]:
            continue
        sel = survivors[i] if survivors is not None else None
        if sel is None:
            sel = select_above_threshold(cs[i], th)
        words[sel] |= np.uint32(1 << i)
    return StackedBitVectors(words=words)


def prefilter_score(token_cids: np.ndarray, bv: StackedBitVectors) -> int:
    """Number of query terms with at least one close token in the passage."""
    if len(token_cids) == 0:
        return 0
    mask = np.bitwise_or.reduce(bv.words[np.asarray(token_cids)])
    return int(mask).bit_count()


def prefilter_scores_batch(
    pids: np.ndarray,
    bv: StackedBitVectors,
    corpus: CompressedCorpus,
) -> np.ndarray:
    """prefilter_score for many passages at once (int64 array)."""
    pids = np.asarray(pids, dtype=np.int64)
    if pids.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    offsets = corpus.passage_offsets.astype(np.int64)
    starts = offsets[pids]
    lens = offsets[pids + 1] - starts
    bounds = np.zeros(pids.shape[0], dtype=np.int64)
    np.cumsum(lens[:-1], out=bounds[1:])
    # flat token positions of every candidate, candidate-major
    pos = np.arange(int(lens.sum()), dtype=np.int64) + np.repeat(starts - bounds, lens)
    vals = bv.words[corpus.token_centroid_ids[pos]]
    masks = np.bitwise_or.reduceat(vals, bounds)
    return popcount_u32(masks)


def select_candidates(
    candidate_pids: np.ndarray,
    bv: StackedBitVectors,
    corpus: CompressedCorpus,
    n_filter: int,
) -> np.ndarray:
    """Keep the n_filter candidates with the highest prefilter score.

    Ranked by (score desc, passage id asc); the cut is strict, tied
    passages at the boundary are not admitted beyond n_filter.
    """
    candidate_pids = np.asarray(candidate_pids, dtype=np.int64)
    scores = prefilter_scores_batch(candidate_pids, bv, corpus)
    order = np.lexsort((candidate_pids, -scores))
    return candidate_pids[order[:n_filter]]
