"""Seeded k-means over embedding vectors.

Classic Lloyd iterations from k-means++ initialization. Everything is
deterministic given the seed: sampling uses a dedicated numpy Generator,
assignment ties go to the lowest cluster index, and restarts are ranked
by inertia with the earliest restart winning ties.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .backends import EmbeddingVector
from .kernels import assign_nearest

PointsLike = Union[np.ndarray, Sequence[EmbeddingVector]]


class ClusteringError(ValueError):
    pass


def as_matrix(points: PointsLike) -> np.ndarray:
    """Normalize vectors or a matrix to a C-contiguous float64 (n, d) array."""
    if isinstance(points, np.ndarray):
        mat = np.ascontiguousarray(points, dtype=np.float64)
        if mat.ndim != 2:
            raise ClusteringError(f"expected a 2-d matrix, got shape {mat.shape}")
        return mat
    rows = [p.values for p in points]
    if not rows:
        raise ClusteringError("no points")
    return np.ascontiguousarray(np.stack(rows), dtype=np.float64)


@dataclass
class ClusterModel:
    centroids: np.ndarray  # (k, d)
    labels: np.ndarray  # (n,) int64
    inertia: float
    n_iter: int
    converged: bool
    seed: int
    keys: Optional[List[str]] = None

    @property
    def k(self) -> int:
        return int(self.centroids.shape[0])

    @property
    def assignments(self) -> Dict[str, int]:
        """Mapping key -> cluster id (indices stringified when no keys given)."""
        keys = self.keys if self.keys is not None else [str(i) for i in range(len(self.labels))]
        return {key: int(lab) for key, lab in zip(keys, self.labels)}

    def predict(self, points: PointsLike) -> np.ndarray:
        labels, _ = assign_nearest(as_matrix(points), self.centroids)
        return labels

    def members(self, cluster_id: int) -> np.ndarray:
        return np.flatnonzero(self.labels == cluster_id)


def _kmeanspp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding. Degenerate case: once every remaining point
    coincides with a chosen centroid (all D^2 zero), fall back to the
    lowest-index unchosen points so the result stays deterministic."""
    n = points.shape[0]
    chosen = np.empty(k, dtype=np.int64)
    chosen[0] = int(rng.integers(n))
    d2 = np.sum((points - points[chosen[0]]) ** 2, axis=1)
    taken = np.zeros(n, dtype=bool)
    taken[chosen[0]] = True
    for j in range(1, k):
        total = float(d2.sum())
        if total <= 0.0:
            idx = int(np.flatnonzero(~taken)[0])
        else:
            cum = np.cumsum(d2)
            idx = int(np.searchsorted(cum, rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        chosen[j] = idx
        taken[idx] = True
        d2 = np.minimum(d2, np.sum((points - points[idx]) ** 2, axis=1))
    return points[chosen].copy()


def _cluster_means(points: np.ndarray, labels: np.ndarray, k: int) -> Tuple[np.ndarray, np.ndarray]:
    counts = np.bincount(labels, minlength=k)
    sums = np.empty((k, points.shape[1]), dtype=np.float64)
    for j in range(points.shape[1]):
        sums[:, j] = np.bincount(labels, weights=points[:, j], minlength=k)
    return sums, counts


def _lloyd(points: np.ndarray, k: int, max_iters: int,
           rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray, float, int, bool]:
    centroids = _kmeanspp_init(points, k, rng)
    prev_labels: Optional[np.ndarray] = None
    converged = False
    n_iter = 0
    for n_iter in range(1, max_iters + 1):
        labels, sqd = assign_nearest(points, centroids)
        counts = np.bincount(labels, minlength=k)
        empties = np.flatnonzero(counts == 0)
        if empties.size:
            # Reseed each empty cluster on the point currently farthest from
            # its centroid; ties and repeat picks resolve to the lowest index.
            order = np.lexsort((np.arange(len(sqd)), -sqd))
            used = 0
            for cid in empties:
                centroids[cid] = points[order[used]]
                used += 1
            prev_labels = None
            continue
        if prev_labels is not None and np.array_equal(labels, prev_labels):
            converged = True
            break
        prev_labels = labels
        sums, counts = _cluster_means(points, labels, k)
        centroids = sums / counts[:, None]
    labels, sqd = assign_nearest(points, centroids)
    return centroids, labels, float(sqd.sum()), n_iter, converged


def kmeans(points: PointsLike, k: int, *, max_iters: int = 100, seed: int = 0,
           n_init: int = 10, keys: Optional[Sequence[str]] = None) -> ClusterModel:
    """Cluster points into min(k, n) groups.

    Runs n_init independent seeded restarts and keeps the lowest-inertia
    one (first restart wins ties). k >= n degenerates to one point per
    cluster with zero inertia.
    """
    mat = as_matrix(points)
    n = mat.shape[0]
    if n < 1:
        raise ClusteringError("kmeans requires at least one point")
    if k < 1:
        raise ClusteringError(f"k must be positive, got {k}")
    if keys is not None and len(keys) != n:
        raise ClusteringError(f"{len(keys)} keys for {n} points")
    if max_iters < 1:
        raise ClusteringError(f"max_iters must be positive, got {max_iters}")
    if n_init < 1:
        raise ClusteringError(f"n_init must be positive, got {n_init}")
    k_eff = min(k, n)

    seq = np.random.SeedSequence(seed)
    best: Optional[Tuple[np.ndarray, np.ndarray, float, int, bool]] = None
    for child in seq.spawn(n_init):
        result = _lloyd(mat, k_eff, max_iters, np.random.default_rng(child))
        if best is None or result[2] < best[2]:
            best = result
    centroids, labels, inertia, n_iter, converged = best
    return ClusterModel(centroids=centroids, labels=labels, inertia=inertia,
                        n_iter=n_iter, converged=converged, seed=seed,
                        keys=list(keys) if keys is not None else None)


def nearest_to_centroid(model: ClusterModel, points: PointsLike) -> Dict[int, int]:
    """For each non-empty cluster, the member index closest to its centroid
    (ties -> lowest index). Used by representative-based seed selection."""
    mat = as_matrix(points)
    out: Dict[int, int] = {}
    for cid in range(model.k):
        idx = model.members(cid)
        if idx.size == 0:
            continue
        diffs = mat[idx] - model.centroids[cid]
        local = int(np.argmin(np.einsum("ij,ij->i", diffs, diffs)))
        out[cid] = int(idx[local])
    return out
