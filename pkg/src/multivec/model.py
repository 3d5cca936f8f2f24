"""Core domain types for the multi-vector retrieval engine.

All embeddings are unit-normalized so cosine similarity reduces to a dot
product. Query matrices carry a fixed 32 term slots: one bit per term then
fits a single 32-bit word, which the candidate prefilter depends on.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

NORM_TOL = 1e-4
QUERY_SLOTS = 32
PQ_CODEWORDS = 256


@dataclass
class TokenEmbeddingCollection:
    """Raw corpus: one (n_tokens, dim) float32 matrix per passage."""

    dim: int
    passages: list[np.ndarray]
    total_tokens: int

    @classmethod
    def from_passages(cls, passages: list[np.ndarray]) -> TokenEmbeddingCollection:
        if not passages:
            raise ValueError("collection must contain at least one passage")
        arrs = []
        for p in passages:
            a = np.asarray(p, dtype=np.float32)
            if a.ndim == 1:
                a = a.reshape(1, -1)
            arrs.append(np.ascontiguousarray(a))
        dim = arrs[0].shape[1]
        total = int(sum(a.shape[0] for a in arrs))
        return cls(dim=dim, passages=arrs, total_tokens=total)

    @property
    def num_passages(self) -> int:
        return len(self.passages)

    def stacked(self) -> tuple[np.ndarray, np.ndarray]:
        """All tokens row-stacked, plus the passage-boundary prefix array."""
        tokens = np.vstack(self.passages).astype(np.float32, copy=False)
        counts = np.array([p.shape[0] for p in self.passages], dtype=np.uint64)
        offsets = np.zeros(self.num_passages + 1, dtype=np.uint64)
        np.cumsum(counts, out=offsets[1:])
        return tokens, offsets


def validate_collection(coll: TokenEmbeddingCollection) -> list[str]:
    """Check collection invariants and report every violation found.

    Returns an empty list iff all invariants hold: every vector has
    exactly ``dim`` components and unit L2 norm (within NORM_TOL), every
    passage holds at least one token, and ``total_tokens`` matches the
    actual token count.
    """
    violations: list[str] = []
    seen = 0
    for pid, p in enumerate(coll.passages):
        if p.ndim != 2 or p.shape[1] != coll.dim:
            violations.append(
                f"passage {pid}: expected shape (*, {coll.dim}), got {p.shape}"
            )
            continue
        if p.shape[0] == 0:
            violations.append(f"passage {pid}: empty passage")
            continue
        seen += p.shape[0]
        norms = np.linalg.norm(p.astype(np.float64), axis=1)
        for j in np.flatnonzero(np.abs(norms - 1.0) > NORM_TOL):
            violations.append(
                f"passage {pid} token {j}: norm {norms[j]:.6f} not within "
                f"{NORM_TOL} of 1"
            )
    if seen != coll.total_tokens:
        violations.append(
            f"total_tokens is {coll.total_tokens} but passages hold {seen} tokens"
        )
    return violations


@dataclass
class CentroidIndex:
    """K-means centroids plus inverted lists mapping centroid -> passage ids.

    ``inverted_lists[c]`` is a strictly increasing array of the passages
    with at least one token whose closest centroid is ``c``.
    """

    centroids: np.ndarray
    inverted_lists: list[np.ndarray] = field(default_factory=list)

    @property
    def num_centroids(self) -> int:
        return int(self.centroids.shape[0])

    @property
    def dim(self) -> int:
        return int(self.centroids.shape[1])


@dataclass
class PQCodebook:
    """Product-quantization codebooks over residual sub-vectors.

    ``codewords`` has shape (m, 256, sub_dim) and lives in the rotated
    space when ``rotation`` is present; encode applies ``x @ rotation``
    before splitting, decode undoes it.
    """

    codewords: np.ndarray
    rotation: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.codewords.ndim != 3 or self.codewords.shape[1] != PQ_CODEWORDS:
            raise ValueError(
                f"codewords must have shape (m, {PQ_CODEWORDS}, sub_dim), "
                f"got {self.codewords.shape}"
            )
        if self.rotation is not None:
            r = np.asarray(self.rotation, dtype=np.float32)
            if r.shape != (self.dim, self.dim):
                raise ValueError(f"rotation must be ({self.dim}, {self.dim})")
            err = np.abs(r.T @ r - np.eye(self.dim, dtype=np.float32)).max()
            if err > NORM_TOL:
                raise ValueError(f"rotation is not orthogonal (max |R'R - I| = {err:.2e})")
            self.rotation = r

    @property
    def m(self) -> int:
        return int(self.codewords.shape[0])

    @property
    def sub_dim(self) -> int:
        return int(self.codewords.shape[2])

    @property
    def dim(self) -> int:
        return self.m * self.sub_dim

    def rotate(self, x: np.ndarray) -> np.ndarray:
        return x if self.rotation is None else x @ self.rotation

    def decode(self, codes: np.ndarray) -> np.ndarray:
        """Reconstruct approximate residuals (original space) from codes."""
        codes = np.atleast_2d(codes)
        parts = self.codewords[np.arange(self.m)[None, :], codes]
        flat = parts.reshape(codes.shape[0], self.dim)
        return flat if self.rotation is None else flat @ self.rotation.T


@dataclass
class CompressedCorpus:
    """Per-token closest-centroid ids plus PQ residual codes.

    ``passage_offsets`` maps passage id p to the token range
    [offsets[p], offsets[p+1]) in corpus order.
    """

    token_centroid_ids: np.ndarray
    pq_codes: np.ndarray
    passage_offsets: np.ndarray
    pq: PQCodebook

    @property
    def num_passages(self) -> int:
        return int(self.passage_offsets.shape[0]) - 1

    @property
    def total_tokens(self) -> int:
        return int(self.passage_offsets[-1])

    @property
    def bytes_per_token(self) -> int:
        # 4-byte centroid id + one byte per PQ sub-code
        return 4 + self.pq.m

    def token_range(self, pid: int) -> tuple[int, int]:
        return int(self.passage_offsets[pid]), int(self.passage_offsets[pid + 1])


@dataclass
class QueryMatrix:
    """Fixed 32-slot query term matrix with an active-term mask.

    Padding rows are all-zero and their mask bits are False; queries with
    more than 32 terms are truncated with a warning.
    """

    terms: np.ndarray
    active_mask: np.ndarray

    @classmethod
    def from_embeddings(cls, emb: np.ndarray) -> QueryMatrix:
        emb = np.atleast_2d(np.asarray(emb, dtype=np.float32))
        n, d = emb.shape
        if n > QUERY_SLOTS:
            warnings.warn(
                f"query has {n} terms; truncating to {QUERY_SLOTS}",
                stacklevel=2,
            )
            emb = emb[:QUERY_SLOTS]
            n = QUERY_SLOTS
        terms = np.zeros((QUERY_SLOTS, d), dtype=np.float32)
        terms[:n] = emb
        mask = np.zeros(QUERY_SLOTS, dtype=bool)
        mask[:n] = True
        return cls(terms=terms, active_mask=mask)

    @property
    def dim(self) -> int:
        return int(self.terms.shape[1])

    @property
    def n_active(self) -> int:
        return int(self.active_mask.sum())


@dataclass
class SearchConfig:
    """Query-time knobs.

    ``th`` prunes centroid scores in candidate generation and drives the
    bit-vector prefilter; values <= -1 disable the pruning. ``th_r``
    gates which tokens get a residual score during late interaction;
    -2 disables the gate, +2 forces the fallback path. ``ndocs`` defaults
    to 4 * k.
    """

    k: int = 10
    nprobe: int = 4
    th: float = 0.4
    n_filter: int = 1000
    ndocs: int | None = None
    th_r: float = 0.5
    variant: str = "vectorized_if"

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.nprobe < 1:
            raise ValueError("nprobe must be >= 1")
        if self.ndocs is None:
            self.ndocs = 4 * self.k
        if not (self.k <= self.ndocs <= self.n_filter):
            raise ValueError(
                f"need k <= ndocs <= n_filter, got k={self.k} "
                f"ndocs={self.ndocs} n_filter={self.n_filter}"
            )


@dataclass
class Index:
    """Everything the engine needs at query time; immutable after build."""

    centroid_index: CentroidIndex
    corpus: CompressedCorpus

    @property
    def dim(self) -> int:
        return self.centroid_index.dim

    @property
    def num_centroids(self) -> int:
        return self.centroid_index.num_centroids

    @property
    def num_passages(self) -> int:
        return self.corpus.num_passages

    @property
    def total_tokens(self) -> int:
        return self.corpus.total_tokens
