"""Late interaction over compressed residuals.

The exact token score decomposes into centroid score plus residual score.
The centroid part is already cached from the interaction stage; the
residual part comes from asymmetric-distance lookup tables, so codes are
never decompressed. A per-term gate skips residual lookups for tokens
whose centroid score is not above th_r; when the gate empties a term's
token set, that term falls back to scoring all its tokens.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import QUERY_SLOTS, CompressedCorpus, PQCodebook, QueryMatrix


@dataclass
class ADCTables:
    """tables[i, s, c] = dot(term i's rotated sub-vector s, codeword[s][c])."""

    tables: np.ndarray

    @property
    def m(self) -> int:
        return int(self.tables.shape[1])


def build_adc_tables(query: QueryMatrix, pq: PQCodebook) -> ADCTables:
    """Per-term lookup tables for query-to-code dot products.

    Inactive terms get all-zero tables (their query rows are zero already;
    zeroing keeps that true even for denormal inputs).
    """
    if query.dim != pq.dim:
        raise ValueError(f"query dim {query.dim} != codebook dim {pq.dim}")
    rotated = pq.rotate(query.terms)
    qsub = rotated.reshape(QUERY_SLOTS, pq.m, pq.sub_dim).astype(np.float64)
    # float64 tables: entries then carry no rounding beyond the stored
    # float32 codewords, so table-sum scores track decode-then-dot closely
    tables = np.einsum("qms,mcs->qmc", qsub, pq.codewords.astype(np.float64))
    tables[~query.active_mask] = 0.0
    return ADCTables(tables=tables)


def residual_score(
    i: int,
    token: int,
    adc: ADCTables,
    corpus: CompressedCorpus,
) -> float:
    """Approximate dot(q_i, residual of one corpus token) via table lookup."""
    codes = corpus.pq_codes[token]
    return float(adc.tables[i, np.arange(adc.m), codes].sum())


def make_adc_lookup(adc: ADCTables, codes: np.ndarray):
    """Residual scorer over one passage's (n_tokens, m) code block."""
    m_idx = np.arange(codes.shape[1])[None, :]

    def lookup(i: int, sel: np.ndarray) -> np.ndarray:
        picked = codes[sel]
        return adc.tables[i][m_idx, picked].sum(axis=1)

    return lookup


def make_exact_lookup(residual_dots: np.ndarray):
    """Residual scorer backed by exact per-token dot products
    (test mode: residual_dots is (n_tokens, 32))."""

    def lookup(i: int, sel: np.ndarray) -> np.ndarray:
        return residual_dots[sel, i]

    return lookup


def late_score(
    gathered: np.ndarray,
    residual_lookup,
    th_r: float,
    active_mask: np.ndarray,
) -> tuple[float, int]:
    """Passage score under the gated decomposition, plus the number of
    residual lookups actually performed.

    ``gathered`` is the cached (n_tokens, 32) centroid-score matrix. For
    each active term the residual is evaluated only on tokens whose
    centroid score exceeds th_r; an empty selection falls back to all
    tokens for that term.
    """
    n_tokens = gathered.shape[0]
    all_tokens = np.arange(n_tokens)
    total = 0.0
    evals = 0
    for i in np.flatnonzero(active_mask):
        col = gathered[:, i]
        sel = np.flatnonzero(col > th_r)
        if sel.shape[0] == 0:
            sel = all_tokens
        res = residual_lookup(int(i), sel)
        total += float((col[sel] + res).max())
        evals += int(sel.shape[0])
    return total, evals


def final_topk(scored: list[tuple[int, float]], k: int) -> list[tuple[int, float]]:
    """Top-k (passage id, score) pairs by (score desc, id asc)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    ranked = sorted(scored, key=lambda e: (-e[1], e[0]))
    return ranked[:k]
