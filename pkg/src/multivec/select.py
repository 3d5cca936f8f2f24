"""Hot selection kernels: threshold filtering and filtered top-nprobe.

Four interchangeable implementations of "indices whose score exceeds th"
are provided. They return identical results and differ only in control
flow, which is what the benchmark harness measures:

  naive_if              scalar scan, one conditional store per element
  vectorized_if         16-lane blocks, whole block skipped when no lane hits
  branchless            unconditional store, cursor advanced by the 0/1
                        comparison result; no branch depends on the data
  vectorized_branchless 16-lane blocks compacted through a per-block prefix
                        count, stores never depend on a branch

Kernels compile through numba when available; a NumPy path is selected at
import time otherwise and returns identical output.
"""

from __future__ import annotations

import os

import numpy as np

VARIANTS = ("naive_if", "vectorized_if", "branchless", "vectorized_branchless")

USE_COMPILED = os.environ.get("MULTIVEC_NO_NUMBA", "") != "1"
if USE_COMPILED:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover
        USE_COMPILED = False

if USE_COMPILED:

    @njit(cache=True)
    def _naive_if(row, th, out):
        p = 0
        for j in range(row.shape[0]):
            if row[j] > th:
                out[p] = j
                p += 1
        return p

    @njit(cache=True)
    def _vectorized_if(row, th, out):
        n = row.shape[0]
        p = 0
        j = 0
        while j + 16 <= n:
            hit = False
            for l in range(16):
                hit |= row[j + l] > th
            if hit:
                for l in range(16):
                    if row[j + l] > th:
                        out[p] = j + l
                        p += 1
            j += 16
        while j < n:
            if row[j] > th:
                out[p] = j
                p += 1
            j += 1
        return p

    @njit(cache=True)
    def _branchless(row, th, out):
        p = 0
        for j in range(row.shape[0]):
            out[p] = j
            p += row[j] > th
        return p

    @njit(cache=True)
    def _vectorized_branchless(row, th, out):
        n = row.shape[0]
        p = 0
        j = 0
        flags = np.empty(16, np.int64)
        while j + 16 <= n:
            for l in range(16):
                flags[l] = row[j + l] > th
            c = 0
            for l in range(16):
                out[p + c] = j + l
                c += flags[l]
            p += c
            j += 16
        while j < n:
            out[p] = j
            p += row[j] > th
            j += 1
        return p

    _KERNELS = {
        "naive_if": _naive_if,
        "vectorized_if": _vectorized_if,
        "branchless": _branchless,
        "vectorized_branchless": _vectorized_branchless,
    }
else:
    _KERNELS = {}


def _select_numpy(row: np.ndarray, th: float, out: np.ndarray) -> int:
    idx = np.flatnonzero(row > th)
    out[: idx.shape[0]] = idx
    return int(idx.shape[0])


def select_above_threshold(
    row: np.ndarray,
    th: float,
    variant: str = "vectorized_if",
    out: np.ndarray | None = None,
) -> np.ndarray:
    """Return {j : row[j] > th} in increasing j, as an int64 array.

    ``out``, when given, must be an int64 buffer of capacity len(row) and
    is used as the kernel's write target; the returned array is always a
    fresh copy.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    row = np.ascontiguousarray(row)
    if out is None:
        out = np.empty(row.shape[0], dtype=np.int64)
    kernel = _KERNELS.get(variant, _select_numpy)
    # compare in the row's dtype, matching NumPy's weak scalar promotion
    count = kernel(row, row.dtype.type(th), out)
    return out[:count].copy()


def top_nprobe_filtered(
    row: np.ndarray,
    th: float,
    nprobe: int,
    variant: str = "vectorized_if",
    survivors: np.ndarray | None = None,
) -> np.ndarray:
    """Top-nprobe indices among entries above th, score-descending.

    Ties break toward the lower index. If nothing clears the threshold the
    selection falls back to top-nprobe over the full row, so a query term
    never loses all its probes.
    """
    if nprobe < 1:
        raise ValueError("nprobe must be >= 1")
    if survivors is None:
        survivors = select_above_threshold(row, th, variant=variant)
    if survivors.shape[0] == 0:
        order = np.argsort(-row, kind="stable")
        return order[:nprobe].astype(np.int64)
    order = np.argsort(-row[survivors], kind="stable")
    return survivors[order[:nprobe]].astype(np.int64)


def warmup() -> None:
    """Force JIT compilation of all kernels (no-op on the NumPy path)."""
    row = np.linspace(-1, 1, 64, dtype=np.float32)
    out = np.empty(64, dtype=np.int64)
    for kernel in _KERNELS.values():
        kernel(row, 0.0, out)
