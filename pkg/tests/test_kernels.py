"""Both scan kernels against a naive per-row oracle, ties included."""

import numpy as np
import pytest

from eventnav._kernels import _scan_py

try:
    from eventnav._kernels import _scan

    KERNELS = [_scan_py.topk_scan, _scan.topk_scan]
except ImportError:  # pragma: no cover - extension not built
    KERNELS = [_scan_py.topk_scan]


def oracle_topk(matrix, query, k):
    """Naive full scan: sequential-sum dot products, sorted (-score, row)."""
    scored = []
    for row in range(matrix.shape[0]):
        s = 0.0
        for a, b in zip(matrix[row], query):
            s += float(a) * float(b)
        scored.append((s, row))
    scored.sort(key=lambda t: (-t[0], t[1]))
    top = scored[: min(k, len(scored))]
    return [row for _, row in top], [s for s, _ in top]


@pytest.mark.parametrize("kernel", KERNELS)
def test_matches_oracle_on_random_matrices(kernel):
    rng = np.random.default_rng(7)
    for trial in range(25):
        n = int(rng.integers(1, 60))
        d = int(rng.integers(1, 24))
        k = int(rng.integers(1, 12))
        matrix = np.ascontiguousarray(rng.normal(size=(n, d)))
        query = np.ascontiguousarray(rng.normal(size=d))
        idx, scores = kernel(matrix, query, k)
        want_idx, want_scores = oracle_topk(matrix, query, k)
        assert list(idx) == want_idx
        assert scores == pytest.approx(want_scores, abs=1e-12)


@pytest.mark.parametrize("kernel", KERNELS)
def test_exact_ties_break_by_row_index(kernel):
    # duplicate rows produce exactly equal scores
    row = np.array([0.5, -0.25, 0.125])
    matrix = np.ascontiguousarray(np.stack([row, row * 2.0, row, row * 2.0, row]))
    query = np.ascontiguousarray(row)
    idx, scores = kernel(matrix, query, 5)
    assert list(idx) == [1, 3, 0, 2, 4]
    assert scores[0] == scores[1]
    assert scores[2] == scores[3] == scores[4]


@pytest.mark.parametrize("kernel", KERNELS)
def test_k_larger_than_matrix_and_empty(kernel):
    matrix = np.ascontiguousarray(np.eye(3))
    query = np.ascontiguousarray(np.array([1.0, 0.0, 0.0]))
    idx, scores = kernel(matrix, query, 10)
    assert list(idx) == [0, 1, 2]
    empty = np.empty((0, 4))
    idx, scores = kernel(np.ascontiguousarray(empty), np.ascontiguousarray(np.zeros(4)), 3)
    assert len(idx) == 0 and len(scores) == 0


@pytest.mark.parametrize("kernel", KERNELS)
def test_k_stability_prefix_property(kernel):
    rng = np.random.default_rng(13)
    matrix = np.ascontiguousarray(rng.normal(size=(40, 8)))
    query = np.ascontiguousarray(rng.normal(size=8))
    idx_small, _ = kernel(matrix, query, 4)
    idx_large, _ = kernel(matrix, query, 9)
    assert list(idx_large[:4]) == list(idx_small)


def test_backend_reports_a_name():
    from eventnav._kernels import kernel_backend

    assert kernel_backend() in ("cython", "python")
