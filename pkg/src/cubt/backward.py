"""Backward stages: sibling pruning and leaf joining by trimmed support distance."""

from __future__ import annotations

import csv
import dataclasses
import io
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.spatial.distance import cdist

from .core import (
    ClusterTree,
    Dataset,
    EmptyNode,
    EmptyTable,
    KTooLarge,
    OverlapError,
    Params,
    StageError,
    TreeNode,
)

Pair = Tuple[int, int]


def trim_count(delta: float, size: int) -> int:
    # The epsilon guards products like 0.6 * 5 that land a hair under an integer.
    return max(1, int(math.floor(delta * size + 1e-9)))


def trimmed_mean(distances: np.ndarray, delta: float) -> float:
    """Mean of the smallest ``max(1, floor(delta * len))`` values."""
    m = trim_count(delta, distances.size)
    return float(np.sort(distances)[:m].mean())


def leaf_dissimilarity(data: Dataset, left, right, delta: float) -> float:
    """Symmetric trimmed nearest-neighbour distance between two point sets.

    For each point of one set take its distance to the closest point of the
    other set, average the smallest ``delta`` fraction of those distances,
    and return the larger of the two directional averages.
    """
    left = np.asarray(left, dtype=np.intp).ravel()
    right = np.asarray(right, dtype=np.intp).ravel()
    if left.size == 0 or right.size == 0:
        raise EmptyNode("both point sets must be nonempty")
    if np.intersect1d(left, right).size:
        raise OverlapError("point sets overlap")
    if not 0.0 < delta <= 1.0:
        raise ValueError("delta must lie in (0, 1]")
    dist = cdist(data.values[left], data.values[right])
    return max(trimmed_mean(dist.min(axis=1), delta), trimmed_mean(dist.min(axis=0), delta))


@dataclass
class DissimilarityTable:
    """Pairwise trimmed dissimilarities keyed by ``(i, j)`` with ``i < j``."""

    entries: Dict[Pair, float] = field(default_factory=dict)

    def __getitem__(self, pair: Pair) -> float:
        i, j = pair
        if i == j:
            return 0.0
        return self.entries[(min(i, j), max(i, j))]

    def __len__(self) -> int:
        return len(self.entries)

    def values(self) -> np.ndarray:
        return np.array([self.entries[k] for k in sorted(self.entries)], dtype=float)

    def argmin(self) -> Tuple[Pair, float]:
        best_pair, best = None, math.inf
        for pair in sorted(self.entries):
            if self.entries[pair] < best:
                best_pair, best = pair, self.entries[pair]
        return best_pair, best

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["leaf_i", "leaf_j", "d"])
        for (i, j) in sorted(self.entries):
            writer.writerow([i, j, repr(self.entries[(i, j)])])
        return buf.getvalue()


def eta_from_quantile(table: DissimilarityTable, q: float) -> float:
    """Empirical q-quantile of the table values, linear between order statistics."""
    if len(table) == 0:
        raise EmptyTable("dissimilarity table is empty")
    if not 0.0 < q < 1.0:
        raise ValueError("q must lie in (0, 1)")
    return float(np.quantile(table.values(), q))


def prune(tree: ClusterTree, data: Dataset, params: Params) -> ClusterTree:
    """Collapse sibling leaves whose dissimilarity is at most ``params.mindist``.

    Collapses run deepest node first (smallest id on ties) and repeat until
    no collapsible pair remains, so a freshly collapsed leaf is compared to
    its own sibling in turn. ``mindist == 0`` skips the stage.
    """
    if tree.stage != "maximal":
        raise StageError(f"prune expects a maximal tree, got {tree.stage!r}")
    nodes = dict(tree.nodes)
    if params.mindist > 0:
        cache: Dict[int, float] = {}
        while True:
            collapsible = []
            for node in nodes.values():
                if node.is_leaf:
                    continue
                left, right = nodes[node.left], nodes[node.right]
                if not (left.is_leaf and right.is_leaf):
                    continue
                if node.id not in cache:
                    cache[node.id] = leaf_dissimilarity(
                        data, left.indices, right.indices, params.delta
                    )
                if cache[node.id] <= params.mindist:
                    collapsible.append(node)
            if not collapsible:
                break
            target = min(collapsible, key=lambda nd: (-nd.depth, nd.id))
            del nodes[target.left], nodes[target.right]
            nodes[target.id] = dataclasses.replace(target, split=None, left=None, right=None)
    return ClusterTree(
        nodes,
        root=tree.root,
        stage="pruned",
        n_samples=tree.n_samples,
        n_features=tree.n_features,
    )


class _GroupDistances:
    """Nearest-member distances from every row to every current leaf group."""

    def __init__(self, data: Dataset, groups: Dict[int, np.ndarray], delta: float):
        self.delta = delta
        self.groups = dict(groups)
        self.nearest = {
            gid: cdist(data.values, data.values[idx]).min(axis=1)
            for gid, idx in self.groups.items()
        }

    def dissimilarity(self, a: int, b: int) -> float:
        ia, ib = self.groups[a], self.groups[b]
        return max(
            trimmed_mean(self.nearest[b][ia], self.delta),
            trimmed_mean(self.nearest[a][ib], self.delta),
        )

    def table(self) -> DissimilarityTable:
        ids = sorted(self.groups)
        table = DissimilarityTable()
        for pos, a in enumerate(ids):
            for b in ids[pos + 1 :]:
                table.entries[(a, b)] = self.dissimilarity(a, b)
        return table

    def merge(self, keep: int, drop: int) -> None:
        self.groups[keep] = np.sort(np.concatenate([self.groups[keep], self.groups[drop]]))
        self.nearest[keep] = np.minimum(self.nearest[keep], self.nearest[drop])
        del self.groups[drop], self.nearest[drop]


@dataclass
class JoinOutcome:
    tree: ClusterTree
    initial_table: DissimilarityTable
    trace: List[Tuple[Pair, float]]
    eta: Optional[float]


def join_leaves(tree: ClusterTree, data: Dataset, params: Params) -> JoinOutcome:
    """Agglomerate leaves by smallest dissimilarity; see :func:`join`."""
    if tree.stage != "pruned":
        raise StageError(f"join expects a pruned tree, got {tree.stage!r}")
    leaves = tree.leaves()
    if params.k is not None and len(leaves) < params.k:
        raise KTooLarge(
            f"pruned tree has {len(leaves)} leaves but k={params.k}; "
            "lower mindev or minsize so the maximal tree grows more leaves"
        )
    state = _GroupDistances(data, {leaf: tree.nodes[leaf].indices for leaf in leaves}, params.delta)
    members = {leaf: [leaf] for leaf in leaves}
    table = state.table()
    initial = DissimilarityTable(dict(table.entries))

    eta = None
    if params.k is None and len(table):
        eta = eta_from_quantile(table, params.eta_quantile)

    trace: List[Tuple[Pair, float]] = []
    while len(state.groups) > 1:
        pair, d = table.argmin()
        if params.k is not None:
            if len(state.groups) <= params.k:
                break
        elif not d < eta:
            break
        keep, drop = pair
        trace.append((pair, d))
        state.merge(keep, drop)
        members[keep].extend(members.pop(drop))
        table.entries = {
            (i, j): v for (i, j), v in table.entries.items() if drop not in (i, j) and keep not in (i, j)
        }
        for other in state.groups:
            if other != keep:
                table.entries[(min(keep, other), max(keep, other))] = state.dissimilarity(keep, other)

    order = {leaf: pos for pos, leaf in enumerate(leaves)}
    groups = sorted(members.values(), key=lambda ls: min(order[leaf] for leaf in ls))
    cluster_map = {leaf: label for label, ls in enumerate(groups, start=1) for leaf in ls}
    joined = ClusterTree(
        tree.nodes,
        root=tree.root,
        stage="joined",
        n_samples=tree.n_samples,
        n_features=tree.n_features,
        cluster_map=cluster_map,
    )
    return JoinOutcome(joined, initial, trace, eta)


def join(tree: ClusterTree, data: Dataset, params: Params) -> ClusterTree:
    """Merge leaves pairwise, closest first, recomputing distances after each merge.

    With ``params.k`` set, merging stops at k groups. Otherwise the stop
    threshold is the ``eta_quantile`` quantile of the initial table and
    merging continues while the smallest dissimilarity is below it.
    Leaves keep their place in the tree; merged leaves share a label.
    """
    return join_leaves(tree, data, params).tree


def dissimilarity_table(tree: ClusterTree, data: Dataset, delta: float) -> DissimilarityTable:
    """Pairwise table over the leaves of ``tree`` (one entry per leaf pair)."""
    groups = {leaf: tree.nodes[leaf].indices for leaf in tree.leaves()}
    return _GroupDistances(data, groups, delta).table()
