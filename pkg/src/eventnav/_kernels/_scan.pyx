# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled selection stage of the top-k scan.

The dot products go through numpy's BLAS in both backends (a scalar loop
cannot compete with a vendor matvec); what this extension replaces is the
selection: one O(n*k) insertion pass over the score buffer instead of the
fallback's full argsort. Scores are therefore bitwise identical across
backends, and ties break by row index in both.
"""

import numpy as np

BACKEND = "cython"


def topk_scan(matrix, query, Py_ssize_t k):
    """Exact top-k of ``matrix @ query``: scores descending, ties by row asc."""
    scores = np.dot(matrix, query)
    return select_topk(scores, k)


def select_topk(double[::1] scores, Py_ssize_t k):
    """Top-k indices/values of a score vector via insertion selection."""
    cdef Py_ssize_t n = scores.shape[0]
    if k > n:
        k = n
    if k < 0:
        k = 0
    out_idx = np.empty(k, dtype=np.int64)
    out_score = np.empty(k, dtype=np.float64)
    if k == 0:
        return out_idx, out_score

    cdef long long[::1] idx_v = out_idx
    cdef double[::1] score_v = out_score
    cdef Py_ssize_t filled = 0
    cdef Py_ssize_t i, pos
    cdef double s

    for i in range(n):
        s = scores[i]
        if filled < k:
            pos = filled
            filled += 1
        elif s > score_v[k - 1]:
            pos = k - 1
        else:
            continue
        # shift strictly-smaller entries down; equal scores keep the earlier row
        while pos > 0 and score_v[pos - 1] < s:
            score_v[pos] = score_v[pos - 1]
            idx_v[pos] = idx_v[pos - 1]
            pos -= 1
        score_v[pos] = s
        idx_v[pos] = i
    return out_idx, out_score
