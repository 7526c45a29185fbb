"""Misclassification error minimized over label permutations."""

from __future__ import annotations

import itertools
from typing import Iterable, Tuple

import numpy as np

from .core import CubtError

EXHAUSTIVE_MAX = 8


class LengthMismatch(CubtError):
    pass


class EmptyLabels(CubtError):
    pass


def confusion_matrix(true_labels, pred_labels) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Counts of (true group, predicted cluster) pairs.

    Returns the matrix plus the sorted true and predicted label values that
    index its rows and columns.
    """
    y = np.asarray(true_labels).ravel()
    yhat = np.asarray(pred_labels).ravel()
    if y.size != yhat.size:
        raise LengthMismatch(f"{y.size} true labels vs {yhat.size} predicted labels")
    if y.size == 0:
        raise EmptyLabels("label sequences are empty")
    rows, y_idx = np.unique(y, return_inverse=True)
    cols, p_idx = np.unique(yhat, return_inverse=True)
    counts = np.zeros((rows.size, cols.size), dtype=np.int64)
    np.add.at(counts, (y_idx, p_idx), 1)
    return counts, rows, cols


def _pad_square(counts: np.ndarray) -> np.ndarray:
    s = max(counts.shape)
    out = np.zeros((s, s), dtype=counts.dtype)
    out[: counts.shape[0], : counts.shape[1]] = counts
    return out


def max_agreement_exhaustive(weights: np.ndarray) -> int:
    """Largest total weight over all permutations; O(s!) and meant for s <= 8."""
    s = weights.shape[0]
    rows = np.arange(s)
    best = 0
    for perm in itertools.permutations(range(s)):
        best = max(best, int(weights[rows, perm].sum()))
    return best


def hungarian(cost: np.ndarray) -> np.ndarray:
    """Minimum-cost perfect assignment of a square matrix.

    Shortest augmenting path with row/column potentials, O(s^3). Returns
    ``assign`` with row ``i`` matched to column ``assign[i]``.
    """
    cost = np.asarray(cost, dtype=float)
    s = cost.shape[0]
    if cost.shape != (s, s):
        raise ValueError("cost matrix must be square")
    u = np.zeros(s + 1)
    v = np.zeros(s + 1)
    match_col = np.zeros(s + 1, dtype=int)  # match_col[j] = row (1-based) owning column j
    way = np.zeros(s + 1, dtype=int)
    for i in range(1, s + 1):
        match_col[0] = i
        j0 = 0
        minv = np.full(s + 1, np.inf)
        used = np.zeros(s + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = match_col[j0]
            free = ~used[1:]
            cols = np.nonzero(free)[0] + 1
            reduced = cost[i0 - 1, cols - 1] - u[i0] - v[cols]
            better = reduced < minv[cols]
            minv[cols[better]] = reduced[better]
            way[cols[better]] = j0
            j1 = cols[np.argmin(minv[cols])]
            delta = minv[j1]
            u[match_col[used]] += delta
            v[used] -= delta
            minv[~used] -= delta
            j0 = j1
            if match_col[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            match_col[j0] = match_col[j1]
            j0 = j1
    assign = np.empty(s, dtype=int)
    for j in range(1, s + 1):
        assign[match_col[j] - 1] = j - 1
    return assign


def max_agreement_hungarian(weights: np.ndarray) -> int:
    assign = hungarian(-weights.astype(float))
    return int(weights[np.arange(weights.shape[0]), assign].sum())


def mce(true_labels, pred_labels, method: str = "auto") -> float:
    """Fraction of points misclassified under the best matching of cluster labels.

    Label sets of different sizes are compared by zero-padding the confusion
    matrix to a square. ``method`` is ``"auto"`` (exhaustive up to 8 labels,
    Hungarian beyond), ``"exhaustive"`` or ``"hungarian"``.
    """
    counts, _, _ = confusion_matrix(true_labels, pred_labels)
    weights = _pad_square(counts)
    n = int(counts.sum())
    if method == "auto":
        method = "exhaustive" if weights.shape[0] <= EXHAUSTIVE_MAX else "hungarian"
    if method == "exhaustive":
        agree = max_agreement_exhaustive(weights)
    elif method == "hungarian":
        agree = max_agreement_hungarian(weights)
    else:
        raise ValueError(f"unknown method {method!r}")
    return 1.0 - agree / n


def recovered_k_tally(results: Iterable, true_k: int) -> int:
    """Number of results whose ``k_found`` equals ``true_k``."""
    results = list(results)
    if not results:
        raise ValueError("no results to tally")
    return sum(1 for r in results if r.k_found == true_k)
