"""Lloyd k-means with Forgy initialization, single run and best-of-restarts."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CubtError, Dataset

MAX_ITER = 300


class KOutOfRange(CubtError):
    pass


@dataclass(frozen=True, eq=False)
class KMeansModel:
    centers: np.ndarray
    assignments: np.ndarray  # 1-based
    wcss: float
    iterations: int
    wcss_trace: tuple = ()


def _sq_dist(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - centers[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _wcss(x, centers, labels) -> float:
    diff = x - centers[labels]
    return float(np.einsum("ij,ij->", diff, diff))


def _repair_empty(x, centers, labels, k) -> np.ndarray:
    """Give every empty cluster the point farthest from its own center.

    Donors must keep at least one member, and clusters are filled one at a
    time so two of them never grab the same point.
    """
    labels = labels.copy()
    while True:
        counts = np.bincount(labels, minlength=k)
        empty = np.nonzero(counts == 0)[0]
        if empty.size == 0:
            return labels
        diff = x - centers[labels]
        own = np.einsum("ij,ij->i", diff, diff)
        own[counts[labels] < 2] = -np.inf
        far = int(np.argmax(own))
        centers[empty[0]] = x[far]
        labels[far] = empty[0]


def kmeans(data: Dataset, k: int, seed: int) -> KMeansModel:
    """One Lloyd run started from ``k`` distinct rows drawn with ``seed``.

    Empty clusters get their center moved to the point farthest from its
    own center. Stops when assignments repeat or after 300 iterations.
    """
    x = data.values
    n = x.shape[0]
    if not 1 <= k <= n:
        raise KOutOfRange(f"k={k} outside [1, {n}]")
    rng = np.random.default_rng(seed)
    centers = x[rng.choice(n, size=k, replace=False)].copy()
    labels = None
    trace = []
    iterations = 0
    for iterations in range(1, MAX_ITER + 1):
        new_labels = _repair_empty(x, centers, np.argmin(_sq_dist(x, centers), axis=1), k)
        for c in range(k):
            centers[c] = x[new_labels == c].mean(axis=0)
        trace.append(_wcss(x, centers, new_labels))
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
    labels = new_labels
    return KMeansModel(
        centers=centers,
        assignments=labels + 1,
        wcss=_wcss(x, centers, labels),
        iterations=iterations,
        wcss_trace=tuple(trace),
    )


def kmeans_multi(data: Dataset, k: int, restarts: int, seed: int) -> KMeansModel:
    """Best of ``restarts`` runs seeded ``seed, seed+1, ...`` by within-cluster SS."""
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    best = None
    for offset in range(restarts):
        model = kmeans(data, k, seed + offset)
        if best is None or model.wcss < best.wcss:
            best = model
    return best
