# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels.

Must match cyclesynth.kernels.pure exactly: lowest-index tie breaking in
nearest-centroid assignment and greedy coverage selection, and the same
bigram bucket hash ((o1 * 1000003) ^ o2) % dim.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

DEF HASH_MULT = 1000003


def assign_nearest(points, centroids):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] p = np.ascontiguousarray(points, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] c = np.ascontiguousarray(centroids, dtype=np.float64)
    cdef Py_ssize_t n = p.shape[0]
    cdef Py_ssize_t k = c.shape[0]
    cdef Py_ssize_t d = p.shape[1]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] labels = np.empty(n, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] sqdists = np.empty(n, dtype=np.float64)
    cdef Py_ssize_t i, j, t, best
    cdef double s, diff, best_s
    for i in range(n):
        best = 0
        best_s = 0.0
        for t in range(d):
            diff = p[i, t] - c[0, t]
            best_s += diff * diff
        for j in range(1, k):
            s = 0.0
            for t in range(d):
                diff = p[i, t] - c[j, t]
                s += diff * diff
                if s >= best_s:
                    break
            if s < best_s:
                best_s = s
                best = j
        labels[i] = best
        sqdists[i] = best_s
    return labels, sqdists


def kcenter_select(points, Py_ssize_t n_select, Py_ssize_t seed_index):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] p = np.ascontiguousarray(points, dtype=np.float64)
    cdef Py_ssize_t n = p.shape[0]
    cdef Py_ssize_t d = p.shape[1]
    if not 1 <= n_select <= n:
        raise ValueError(f"n_select {n_select} out of range for {n} points")
    if not 0 <= seed_index < n:
        raise ValueError(f"seed_index {seed_index} out of range for {n} points")
    cdef cnp.ndarray[cnp.int64_t, ndim=1] selected = np.empty(n_select, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] min_sq = np.empty(n, dtype=np.float64)
    cdef Py_ssize_t i, j, t, nxt, last
    cdef double s, diff, best
    selected[0] = seed_index
    for j in range(n):
        s = 0.0
        for t in range(d):
            diff = p[j, t] - p[seed_index, t]
            s += diff * diff
        min_sq[j] = s
    min_sq[seed_index] = -1.0
    for i in range(1, n_select):
        nxt = 0
        best = min_sq[0]
        for j in range(1, n):
            if min_sq[j] > best:
                best = min_sq[j]
                nxt = j
        selected[i] = nxt
        for j in range(n):
            if min_sq[j] < 0.0:
                continue
            s = 0.0
            for t in range(d):
                diff = p[j, t] - p[nxt, t]
                s += diff * diff
            if s < min_sq[j]:
                min_sq[j] = s
        min_sq[nxt] = -1.0
    return selected


def bigram_counts(texts, Py_ssize_t dim):
    if dim <= 0:
        raise ValueError("dim must be positive")
    cdef Py_ssize_t n = len(texts)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.zeros((n, dim), dtype=np.float64)
    cdef Py_ssize_t i, h
    cdef long long prev, cur
    cdef str text
    cdef Py_UCS4 ch
    for i in range(n):
        text = texts[i]
        prev = -1
        for ch in text:
            cur = <long long> ch
            if prev >= 0:
                h = <Py_ssize_t> (((prev * HASH_MULT) ^ cur) % dim)
                out[i, h] += 1.0
            prev = cur
    return out
