"""Forward stage: deviance, best axis-aligned split, maximal tree growth."""

from __future__ import annotations

import dataclasses
import warnings
from collections import deque
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from .core import (
    ClusterTree,
    Dataset,
    EmptyNode,
    Params,
    SingletonNode,
    SplitRule,
    TreeNode,
)

MINDEV_FALLBACK = (0.6, 0.5, 0.4, 0.3, 0.2, 0.1, 0.05, 0.01)

# Relative gap under which two deviance reductions count as a tie.
TIE_RTOL = 1e-12


class FallbackExhausted(UserWarning):
    """The mindev sequence ran out before the tree reached k leaves."""


@dataclass(frozen=True)
class SplitCandidate:
    feature: int
    threshold: float
    delta_R: float
    left_count: int
    right_count: int

    @property
    def rule(self) -> SplitRule:
        return SplitRule(self.feature, self.threshold)


def _check_indices(indices) -> np.ndarray:
    idx = np.asarray(indices, dtype=np.intp).ravel()
    if idx.size == 0:
        raise EmptyNode("node contains no observations")
    return idx


def node_deviance(data: Dataset, indices) -> float:
    """Sum of squared distances to the node mean, divided by the full sample size."""
    idx = _check_indices(indices)
    x = data.values[idx]
    centered = x - x.mean(axis=0)
    return float(np.einsum("ij,ij->", centered, centered) / data.n)


def split_candidates(data: Dataset, indices) -> Iterator[SplitCandidate]:
    """Yield every midpoint split of the node with its deviance reduction.

    The reduction is computed from the between-children term
    ``n_l n_r / (n n_t) * |mean_l - mean_r|^2``, which equals
    ``R(t) - R(t_l) - R(t_r)`` and is nonnegative by construction.
    Candidates come out ordered by feature, then threshold.
    """
    idx = _check_indices(indices)
    if idx.size < 2:
        raise SingletonNode("a node needs at least two observations to split")
    x = data.values[idx]
    n_t = idx.size
    total = x.sum(axis=0)
    for j in range(data.p):
        order = np.argsort(x[:, j], kind="stable")
        col = x[order, j]
        cuts = np.nonzero(col[:-1] < col[1:])[0]
        if cuts.size == 0:
            continue
        csum = np.cumsum(x[order], axis=0)[cuts]
        n_left = (cuts + 1).astype(float)
        n_right = n_t - n_left
        diff = csum / n_left[:, None] - (total - csum) / n_right[:, None]
        gain = n_left * n_right / (data.n * n_t) * np.einsum("ij,ij->i", diff, diff)
        thresholds = (col[cuts] + col[cuts + 1]) / 2.0
        for c in range(cuts.size):
            yield SplitCandidate(
                j, float(thresholds[c]), float(gain[c]), int(n_left[c]), int(n_right[c])
            )


def best_split(data: Dataset, indices, min_child: int = 1) -> Optional[SplitCandidate]:
    """Return the candidate with the largest deviance reduction, or None.

    Ties go to the smallest feature index, then the smallest threshold.
    ``min_child`` discards candidates leaving fewer points in either child.
    """
    best = None
    for cand in split_candidates(data, indices):
        if min(cand.left_count, cand.right_count) < min_child:
            continue
        # Candidates arrive in (feature, threshold) order, so keeping the
        # earliest one within the tie band implements the tie-break.
        if best is None or (cand.delta_R > best.delta_R and not _tied(cand.delta_R, best.delta_R)):
            best = cand
    if best is None or best.delta_R <= 0.0:
        return None
    return best


def _tied(a: float, b: float) -> bool:
    return abs(a - b) <= TIE_RTOL * max(abs(a), abs(b))


def grow_maximal_tree(data: Dataset, params: Params) -> ClusterTree:
    """Split nodes breadth-first until every leaf meets a stopping rule.

    A node is terminal when it holds fewer than ``minsize`` points, admits
    no split, or its best reduction is below ``mindev`` times the root
    deviance.
    """
    root_idx = np.arange(data.n)
    root_dev = node_deviance(data, root_idx)
    stop_gain = params.mindev * root_dev
    min_child = params.minsize if params.min_child_size else 1

    nodes = {}
    next_id = 1
    queue = deque([(0, root_idx, None, 0)])
    pending = {0: root_dev}
    while queue:
        node_id, idx, parent, depth = queue.popleft()
        dev = pending.pop(node_id)
        cand = None
        if idx.size >= params.minsize and idx.size >= 2:
            cand = best_split(data, idx, min_child=min_child)
            if cand is not None and cand.delta_R < stop_gain:
                cand = None
        if cand is None:
            nodes[node_id] = TreeNode(node_id, idx, dev, parent=parent, depth=depth)
            continue
        go_left = data.values[idx, cand.feature] <= cand.threshold
        left_id, right_id = next_id, next_id + 1
        next_id += 2
        for child_id, child_idx in ((left_id, idx[go_left]), (right_id, idx[~go_left])):
            pending[child_id] = node_deviance(data, child_idx)
            queue.append((child_id, child_idx, node_id, depth + 1))
        nodes[node_id] = TreeNode(
            node_id,
            idx,
            dev,
            parent=parent,
            depth=depth,
            split=cand.rule,
            left=left_id,
            right=right_id,
        )
    return ClusterTree(nodes, root=0, stage="maximal", n_samples=data.n, n_features=data.p)


def mindev_fallback(data: Dataset, params: Params, k: int) -> ClusterTree:
    """Grow with ``params.mindev``, lowering it along a fixed sequence until >= k leaves.

    Emits :class:`FallbackExhausted` and returns the last tree if no value works.
    """
    if k < 1:
        raise ValueError("k must be positive")
    tree = grow_maximal_tree(data, params)
    if tree.n_leaves >= k:
        return tree
    for mindev in MINDEV_FALLBACK:
        if mindev >= params.mindev:
            continue
        tree = grow_maximal_tree(data, dataclasses.replace(params, mindev=mindev))
        if tree.n_leaves >= k:
            return tree
    warnings.warn(
        f"maximal tree has {tree.n_leaves} leaves after exhausting mindev fallback "
        f"(needed {k})",
        FallbackExhausted,
        stacklevel=2,
    )
    return tree
