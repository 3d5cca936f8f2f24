"""Centroid-approximated scoring of candidate passages.

Every token's similarity to a query term is approximated by the term's
score against the token's closest centroid. Scoring a passage is then a
gather of per-centroid score rows from the transposed score matrix,
a column-wise max over the gathered rows, and a sum over active terms.
The gathered matrix is kept so late interaction can reuse the centroid
term of its decomposition instead of decompressing residuals.
"""

from __future__ import annotations

import os

import numpy as np

from .model import QUERY_SLOTS

USE_COMPILED = os.environ.get("MULTIVEC_NO_NUMBA", "") != "1"
if USE_COMPILED:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover
        USE_COMPILED = False

if USE_COMPILED:

    @njit(cache=True)
    def _column_max_32(mat):
        # two 16-wide accumulators; a 32-term row is exactly two lane groups
        lo = mat[0, :16].copy()
        hi = mat[0, 16:].copy()
        for r in range(1, mat.shape[0]):
            for c in range(16):
                v = mat[r, c]
                if v > lo[c]:
                    lo[c] = v
            for c in range(16):
                v = mat[r, 16 + c]
                if v > hi[c]:
                    hi[c] = v
        out = np.empty(32, mat.dtype)
        out[:16] = lo
        out[16:] = hi
        return out


def column_max(mat: np.ndarray) -> np.ndarray:
    """Per-column maximum of a (n_tokens, 32) matrix."""
    if mat.shape[0] == 0:
        raise ValueError("column_max needs at least one row")
    if USE_COMPILED and mat.shape[1] == QUERY_SLOTS:
        return _column_max_32(np.ascontiguousarray(mat))
    return mat.max(axis=0)


def transpose_scores(cs: np.ndarray) -> np.ndarray:
    """Transpose the term-by-centroid score matrix into centroid-major
    layout so one centroid's 32 term scores are contiguous."""
    return np.ascontiguousarray(cs.T)


def centroid_score(
    token_cids: np.ndarray,
    cs_t: np.ndarray,
    active_mask: np.ndarray,
) -> tuple[float, np.ndarray]:
    """Approximate passage score plus the gathered (n_tokens, 32) matrix.

    The score is the sum over active terms of the per-term maximum across
    tokens. The gathered matrix is returned for reuse during late
    interaction.
    """
    gathered = cs_t[np.asarray(token_cids, dtype=np.int64)]
    maxima = column_max(gathered)
    # maxima are exact float32 picks; accumulate the short sum in float64
    return float(maxima[active_mask].astype(np.float64).sum()), gathered


def select_ndocs(
    scored: list[tuple[int, float]],
    ndocs: int,
) -> list[int]:
    """Top-ndocs passage ids by (score desc, id asc)."""
    if ndocs < 1:
        raise ValueError("ndocs must be >= 1")
    ranked = sorted(scored, key=lambda e: (-e[1], e[0]))
    return [pid for pid, _ in ranked[:ndocs]]
