"""Pure-numpy implementations of the hot kernels.

Used when the compiled extension is unavailable (or explicitly disabled
via CYCLESYNTH_PURE_KERNELS=1). Semantics are identical to the compiled
versions: ties in nearest-centroid assignment and in greedy coverage
selection always resolve to the lowest index.
"""

from __future__ import annotations

from typing import List, Sequence, Tuple

import numpy as np

_HASH_MULT = 1000003


def assign_nearest(points: np.ndarray, centroids: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Nearest centroid per point under Euclidean distance.

    Returns (labels, sqdists). Ties go to the lowest centroid index; the
    returned squared distances are recomputed exactly for the chosen
    centroid (the argmin scan uses the |x|^2 + |c|^2 - 2x.c expansion).
    """
    points = np.asarray(points, dtype=np.float64)
    centroids = np.asarray(centroids, dtype=np.float64)
    p_sq = np.einsum("ij,ij->i", points, points)
    c_sq = np.einsum("ij,ij->i", centroids, centroids)
    # argmin over the expansion; p_sq is constant per row so it can be dropped
    scores = c_sq[None, :] - 2.0 * (points @ centroids.T)
    labels = np.argmin(scores, axis=1).astype(np.int64)
    diffs = points - centroids[labels]
    sqdists = np.einsum("ij,ij->i", diffs, diffs)
    del p_sq
    return labels, sqdists


def kcenter_select(points: np.ndarray, n_select: int, seed_index: int) -> np.ndarray:
    """Greedy maximin coverage selection.

    Starts from seed_index and repeatedly adds the point with the largest
    minimum distance to the already-selected set (ties -> lowest index).
    Returns the selected indices in selection order.
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if not 1 <= n_select <= n:
        raise ValueError(f"n_select {n_select} out of range for {n} points")
    if not 0 <= seed_index < n:
        raise ValueError(f"seed_index {seed_index} out of range for {n} points")
    selected = np.empty(n_select, dtype=np.int64)
    selected[0] = seed_index
    diffs = points - points[seed_index]
    min_sq = np.einsum("ij,ij->i", diffs, diffs)
    min_sq[seed_index] = -1.0  # marks selected; below any real distance
    for i in range(1, n_select):
        nxt = int(np.argmax(min_sq))
        selected[i] = nxt
        diffs = points - points[nxt]
        np.minimum(min_sq, np.einsum("ij,ij->i", diffs, diffs), out=min_sq)
        min_sq[nxt] = -1.0
    return selected


def bigram_counts(texts: Sequence[str], dim: int) -> np.ndarray:
    """Hashed character-bigram count vectors, one row per text.

    Bucket for adjacent code points (o1, o2) is ((o1 * 1000003) ^ o2) % dim.
    Texts shorter than two characters produce a zero row.
    """
    if dim <= 0:
        raise ValueError("dim must be positive")
    out = np.zeros((len(texts), dim), dtype=np.float64)
    for i, text in enumerate(texts):
        if len(text) < 2:
            continue
        codes = np.fromiter((ord(c) for c in text), dtype=np.int64, count=len(text))
        buckets = ((codes[:-1] * _HASH_MULT) ^ codes[1:]) % dim
        out[i] = np.bincount(buckets, minlength=dim).astype(np.float64)
    return out
