"""Query pipeline: candidate retrieval, bit-vector prefiltering,
centroid-approximated scoring, and gated late interaction."""

from __future__ import annotations

import heapq
import time
import warnings
from dataclasses import dataclass

import numpy as np

from .interaction import centroid_score, transpose_scores
from .late import (
    build_adc_tables,
    final_topk,
    late_score,
    make_adc_lookup,
    make_exact_lookup,
)
from .model import Index, QueryMatrix, SearchConfig
from .prefilter import build_stacked_bitvectors, select_candidates
from .select import select_above_threshold, top_nprobe_filtered

__all__ = ["SearchEngine", "SearchResult", "PhaseTimings", "QueryStats", "ScoreScratch"]


@dataclass
class PhaseTimings:
    """Wall-clock seconds per pipeline phase."""

    retrieval: float = 0.0
    prefilter: float = 0.0
    interaction: float = 0.0
    late: float = 0.0
    total: float = 0.0

    def as_dict(self) -> dict[str, float]:
        return {
            "retrieval": self.retrieval,
            "prefilter": self.prefilter,
            "interaction": self.interaction,
            "late": self.late,
            "total": self.total,
        }


@dataclass
class QueryStats:
    """Work counters for one query."""

    candidates: int = 0
    prefiltered: int = 0
    scored_docs: int = 0
    residual_evals: int = 0
    full_token_evals: int = 0

    @property
    def residual_work_ratio(self) -> float:
        """Residual lookups performed over the lookups an ungated late
        interaction would perform; 1.0 when the gate saves nothing."""
        if self.full_token_evals == 0:
            return 0.0
        return self.residual_evals / self.full_token_evals


@dataclass
class SearchResult:
    ranking: list[tuple[int, float]]
    timings: PhaseTimings
    stats: QueryStats


@dataclass
class ScoreScratch:
    """Reusable per-query buffers; never share one across threads."""

    survivor_buf: np.ndarray
    words: np.ndarray

    @classmethod
    def for_index(cls, index: Index) -> ScoreScratch:
        n = index.num_centroids
        return cls(
            survivor_buf=np.empty(n, dtype=np.int64),
            words=np.zeros(n, dtype=np.uint32),
        )


class SearchEngine:
    """Executes queries against an immutable index.

    The index is read-only and one engine may serve any number of
    concurrent queries as long as each call gets its own scratch (the
    default). ``exact_residuals`` switches late interaction from PQ lookup
    tables to exact residual dot products; it exists so the full pipeline
    can be checked against exhaustive scoring.
    """

    def __init__(self, index: Index, exact_residuals: np.ndarray | None = None):
        self.index = index
        self.centroids_t = np.ascontiguousarray(index.centroid_index.centroids.T)
        self.exact_residuals = None
        if exact_residuals is not None:
            if exact_residuals.shape != (index.total_tokens, index.dim):
                raise ValueError(
                    f"exact_residuals must be ({index.total_tokens}, {index.dim})"
                )
            self.exact_residuals = np.ascontiguousarray(
                exact_residuals, dtype=np.float32
            )

    def search(
        self,
        query: QueryMatrix,
        cfg: SearchConfig | None = None,
        scratch: ScoreScratch | None = None,
    ) -> SearchResult:
        """Run the four-phase pipeline and return the ranked top-k."""
        cfg = cfg or SearchConfig()
        if query.n_active == 0:
            raise ValueError("query has no active terms")
        if query.dim != self.index.dim:
            raise ValueError(f"query dim {query.dim} != index dim {self.index.dim}")
        k = cfg.k
        if k > self.index.num_passages:
            warnings.warn(
                f"k={k} exceeds corpus size {self.index.num_passages}; clamping",
                stacklevel=2,
            )
            k = self.index.num_passages
        if scratch is None:
            scratch = ScoreScratch.for_index(self.index)
        index, corpus = self.index, self.index.corpus
        stats = QueryStats()
        timings = PhaseTimings()
        t_start = time.perf_counter()

        # phase 1: centroid scores, per-term probes, candidate union
        cs = query.terms @ self.centroids_t
        survivors: list[np.ndarray | None] = [None] * len(query.active_mask)
        probed: list[np.ndarray] = []
        for i in np.flatnonzero(query.active_mask):
            surv = select_above_threshold(
                cs[i], cfg.th, variant=cfg.variant, out=scratch.survivor_buf
            )
            survivors[i] = surv
            probed.append(
                top_nprobe_filtered(
                    cs[i], cfg.th, cfg.nprobe, variant=cfg.variant, survivors=surv
                )
            )
        probed_ids = np.unique(np.concatenate(probed))
        lists = index.centroid_index.inverted_lists
        gathered_lists = [lists[int(c)] for c in probed_ids if len(lists[int(c)])]
        if gathered_lists:
            candidates = np.unique(np.concatenate(gathered_lists)).astype(np.int64)
        else:
            candidates = np.zeros(0, dtype=np.int64)
        stats.candidates = int(candidates.shape[0])
        timings.retrieval = time.perf_counter() - t_start

        # phase 2: stacked bit vectors, existential term-count filter
        t1 = time.perf_counter()
        bv = build_stacked_bitvectors(
            cs, cfg.th, query.active_mask, survivors=survivors, out_words=scratch.words
        )
        kept = select_candidates(candidates, bv, corpus, cfg.n_filter)
        stats.prefiltered = int(kept.shape[0])
        timings.prefilter = time.perf_counter() - t1

        # phase 3: centroid-approximated scores, keep top-ndocs with their
        # gathered score matrices (bounded by ndocs entries)
        t2 = time.perf_counter()
        cs_t = transpose_scores(cs)
        offsets = corpus.passage_offsets.astype(np.int64)
        heap: list[tuple[float, int, np.ndarray]] = []
        for pid in kept:
            pid = int(pid)
            s, e = offsets[pid], offsets[pid + 1]
            score, gathered = centroid_score(
                corpus.token_centroid_ids[s:e], cs_t, query.active_mask
            )
            entry = (score, -pid, gathered)
            if len(heap) < cfg.ndocs:
                heapq.heappush(heap, entry)
            elif entry[:2] > heap[0][:2]:
                heapq.heapreplace(heap, entry)
        selected = sorted(heap, key=lambda e: (-e[0], -e[1]))
        timings.interaction = time.perf_counter() - t2

        # phase 4: gated late interaction over the survivors
        t3 = time.perf_counter()
        adc = None
        if self.exact_residuals is None:
            adc = build_adc_tables(query, corpus.pq)
        n_active = query.n_active
        scored: list[tuple[int, float]] = []
        for cscore, neg_pid, gathered in selected:
            pid = -neg_pid
            s, e = offsets[pid], offsets[pid + 1]
            if self.exact_residuals is None:
                lookup = make_adc_lookup(adc, corpus.pq_codes[s:e])
            else:
                rdots = self.exact_residuals[s:e] @ query.terms.T
                lookup = make_exact_lookup(rdots)
            score, evals = late_score(gathered, lookup, cfg.th_r, query.active_mask)
            scored.append((pid, score))
            stats.residual_evals += evals
            stats.full_token_evals += n_active * int(e - s)
        stats.scored_docs = len(scored)
        ranking = final_topk(scored, k) if scored else []
        timings.late = time.perf_counter() - t3
        timings.total = time.perf_counter() - t_start
        return SearchResult(ranking=ranking, timings=timings, stats=stats)
