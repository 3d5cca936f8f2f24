"""Seeded synthetic corpus with planted relevance.

Passages draw their tokens from a few shared topic directions, and each
query is a noisy copy of tokens sampled from its one relevant passage.
Close-centroid sets are then informative at realistic thresholds and
recall curves behave sensibly at ten-thousand-passage scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import QUERY_SLOTS, TokenEmbeddingCollection


@dataclass
class SyntheticSpec:
    passages: int = 1000
    tokens_per_passage: int = 16
    dim: int = 64
    queries: int = 64
    seed: int = 0
    topics: int = 64
    topics_per_passage: int = 4
    query_terms: int = 8
    # target cosine of a token to its topic, and of a query term to the
    # passage token it copies
    within_cos: float = 0.86
    query_cos: float = 0.95


def _noise_sigma(target_cos: float, dim: int) -> float:
    # unit u plus sigma*N(0,I) has expected cosine ~ 1/sqrt(1 + sigma^2 d)
    return float(np.sqrt(max(1.0 / target_cos**2 - 1.0, 0.0) / dim))


def _unit(rows: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(rows, axis=-1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return rows / norms


def generate(
    spec: SyntheticSpec,
) -> tuple[TokenEmbeddingCollection, TokenEmbeddingCollection, dict[str, set[str]]]:
    """Build (passages, queries-as-token-lists, qrels)."""
    if spec.query_terms > QUERY_SLOTS:
        raise ValueError(f"query_terms must be <= {QUERY_SLOTS}")
    if spec.query_terms > spec.tokens_per_passage:
        raise ValueError("query_terms must be <= tokens_per_passage")
    rng = np.random.default_rng(spec.seed)
    topics = _unit(rng.standard_normal((spec.topics, spec.dim)))
    sig_tok = _noise_sigma(spec.within_cos, spec.dim)
    sig_qry = _noise_sigma(spec.query_cos, spec.dim)

    n_topics_pp = min(spec.topics_per_passage, spec.topics)
    passages: list[np.ndarray] = []
    for _ in range(spec.passages):
        own = rng.choice(spec.topics, size=n_topics_pp, replace=False)
        token_topics = own[rng.integers(0, n_topics_pp, spec.tokens_per_passage)]
        toks = topics[token_topics] + sig_tok * rng.standard_normal(
            (spec.tokens_per_passage, spec.dim)
        )
        passages.append(_unit(toks).astype(np.float32))
    collection = TokenEmbeddingCollection.from_passages(passages)

    relevant = rng.permutation(spec.passages)[: spec.queries]
    if spec.queries > spec.passages:
        extra = rng.integers(0, spec.passages, spec.queries - spec.passages)
        relevant = np.concatenate([relevant, extra])
    queries: list[np.ndarray] = []
    qrels: dict[str, set[str]] = {}
    for qid in range(spec.queries):
        pid = int(relevant[qid])
        src = passages[pid]
        pick = rng.choice(src.shape[0], size=spec.query_terms, replace=False)
        terms = src[pick] + sig_qry * rng.standard_normal(
            (spec.query_terms, spec.dim)
        )
        queries.append(_unit(terms).astype(np.float32))
        qrels[str(qid)] = {str(pid)}
    query_coll = TokenEmbeddingCollection.from_passages(queries)
    return collection, query_coll, qrels


def write_qrels(path, qrels: dict[str, set[str]]) -> None:
    with open(path, "w") as f:
        for qid in sorted(qrels, key=int):
            for pid in sorted(qrels[qid], key=int):
                f.write(f"{qid}\t{pid}\t1\n")
