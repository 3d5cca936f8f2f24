"""Seeded Lloyd k-means with k-means++ init and empty-cluster reseeding."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_CHUNK = 65536


@dataclass
class KMeansResult:
    centroids: np.ndarray
    assignments: np.ndarray
    errors: list[float]


def _pairwise_sq_dists(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    # ||p - c||^2 up to the constant ||p||^2, enough for argmin
    return -2.0 * (points @ centers.T) + np.sum(centers * centers, axis=1)


def _assign(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    out = np.empty(points.shape[0], dtype=np.int64)
    for lo in range(0, points.shape[0], _CHUNK):
        hi = min(lo + _CHUNK, points.shape[0])
        out[lo:hi] = np.argmin(_pairwise_sq_dists(points[lo:hi], centers), axis=1)
    return out


def _plusplus_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    sumsq = np.einsum("nd,nd->n", points, points)
    chosen = np.empty(k, dtype=np.int64)
    chosen[0] = rng.integers(n)
    d2 = np.maximum(
        sumsq - 2.0 * (points @ points[chosen[0]]) + sumsq[chosen[0]], 0.0
    )
    for i in range(1, k):
        total = float(d2.sum())
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            p = d2.astype(np.float64)
            p /= p.sum()
            idx = int(rng.choice(n, p=p))
        chosen[i] = idx
        cand = np.maximum(sumsq - 2.0 * (points @ points[idx]) + sumsq[idx], 0.0)
        np.minimum(d2, cand, out=d2)
    return points[chosen].copy()


def _cluster_sums(points: np.ndarray, assign: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-cluster float64 sums and counts via sort + reduceat."""
    counts = np.bincount(assign, minlength=k)
    order = np.argsort(assign, kind="stable")
    sorted_pts = points[order].astype(np.float64, copy=False)
    boundaries = np.zeros(k, dtype=np.int64)
    np.cumsum(counts[:-1], out=boundaries[1:])
    present = counts > 0
    sums = np.zeros((k, points.shape[1]), dtype=np.float64)
    if present.any():
        # reduceat needs strictly valid segment starts; restrict to non-empty
        seg_starts = boundaries[present]
        reduced = np.add.reduceat(sorted_pts, seg_starts, axis=0)
        sums[present] = reduced
    return sums, counts


def kmeans(
    points: np.ndarray,
    k: int,
    iters: int,
    seed: int,
    spherical: bool = False,
) -> KMeansResult:
    """Run k-means++ seeding followed by ``iters`` Lloyd iterations.

    With ``spherical=True`` centroids are renormalized to unit length after
    every mean update (assignment then maximizes the dot product, which for
    unit-norm inputs matches nearest-by-L2). ``errors`` records, for each
    iteration, the mean squared distance of every point to its cluster mean
    taken before any renormalization; it is non-increasing.

    Empty clusters are reseeded from the point currently farthest from its
    assigned centroid.
    """
    points = np.ascontiguousarray(points, dtype=np.float32)
    n = points.shape[0]
    if k < 1 or k > n:
        raise ValueError(f"need 1 <= k <= {n}, got {k}")
    if iters < 1:
        raise ValueError("iters must be >= 1")
    rng = np.random.default_rng(seed)
    centers = _plusplus_init(points, k, rng)
    if spherical:
        centers = _renorm(centers)

    pts64 = points.astype(np.float64)
    sumsq_total = float(np.einsum("nd,nd->n", pts64, pts64).sum())
    del pts64
    errors: list[float] = []
    assign = np.zeros(n, dtype=np.int64)
    for _ in range(iters):
        if spherical:
            assign = _argmax_dot(points, centers)
        else:
            assign = _assign(points, centers)
        sums, counts = _cluster_sums(points, assign, k)
        means = np.zeros_like(sums)
        nz = counts > 0
        means[nz] = sums[nz] / counts[nz, None]
        # mean squared residual against the raw means:
        #   sum_x ||x - mu||^2 = sum ||x||^2 - sum_c n_c ||mu_c||^2
        err = sumsq_total - float((counts[nz] * np.einsum("cd,cd->c", means[nz], means[nz])).sum())
        errors.append(max(err, 0.0) / n)

        centers = means.astype(np.float32)
        empty = np.flatnonzero(~nz)
        if empty.size:
            centers = _reseed_empty(points, assign, centers, empty)
        if spherical:
            centers = _renorm(centers)
    return KMeansResult(centroids=centers, assignments=assign, errors=errors)


def _argmax_dot(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    out = np.empty(points.shape[0], dtype=np.int64)
    for lo in range(0, points.shape[0], _CHUNK):
        hi = min(lo + _CHUNK, points.shape[0])
        out[lo:hi] = np.argmax(points[lo:hi] @ centers.T, axis=1)
    return out


def _renorm(centers: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(centers, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return (centers / norms).astype(np.float32)


def _reseed_empty(
    points: np.ndarray,
    assign: np.ndarray,
    centers: np.ndarray,
    empty: np.ndarray,
) -> np.ndarray:
    gathered = centers[assign]
    dist = np.einsum("nd,nd->n", points - gathered, points - gathered)
    for c in empty:
        far = int(np.argmax(dist))
        centers[c] = points[far]
        dist[far] = -np.inf
    return centers
