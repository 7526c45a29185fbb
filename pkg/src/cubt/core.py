"""Shared domain types: the sample, split rules, cluster trees and parameters."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np


class CubtError(Exception):
    """Base class for every error raised by this package."""


class DataError(CubtError):
    """Input data is malformed or inconsistent."""


class EmptyDataset(DataError):
    pass


class DimensionError(DataError):
    pass


class ParseError(DataError):
    def __init__(self, message: str, row: Optional[int] = None, column: Optional[str] = None):
        super().__init__(message)
        self.row = row
        self.column = column


class EmptyNode(CubtError):
    pass


class SingletonNode(CubtError):
    pass


class OverlapError(CubtError):
    pass


class StageError(CubtError):
    pass


class KTooLarge(CubtError):
    pass


class EmptyTable(CubtError):
    pass


STAGES = ("maximal", "pruned", "joined")


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Dataset:
    """An n x p sample with optional 1-based ground-truth labels.

    ``row_names`` is used for data sets where rows are named entities
    (countries, for instance); it plays no role in the clustering.
    """

    values: np.ndarray
    labels: Optional[np.ndarray] = None
    column_names: Optional[Tuple[str, ...]] = None
    row_names: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values.reshape(-1, 1)
        if values.ndim != 2:
            raise DimensionError(f"expected a 2-d matrix, got {values.ndim} dimensions")
        if values.shape[0] == 0:
            raise EmptyDataset("dataset has no observations")
        if values.shape[1] == 0:
            raise DimensionError("dataset has no variables")
        if not np.all(np.isfinite(values)):
            raise DataError("dataset contains NaN or infinite values")
        object.__setattr__(self, "values", _frozen_array(values))

        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != (values.shape[0],):
                raise DimensionError(
                    f"labels have length {labels.size}, expected {values.shape[0]}"
                )
            if not np.all(labels == np.round(labels)):
                raise DataError("labels must be integers")
            labels = labels.astype(int)
            uniq = np.unique(labels)
            if uniq[0] != 1 or not np.array_equal(uniq, np.arange(1, uniq.size + 1)):
                raise DataError("labels must form a contiguous set {1..R}")
            object.__setattr__(self, "labels", _frozen_array(labels, dtype=int))

        if self.column_names is not None:
            names = tuple(str(c) for c in self.column_names)
            if len(names) != values.shape[1]:
                raise DimensionError(
                    f"{len(names)} column names for {values.shape[1]} columns"
                )
            object.__setattr__(self, "column_names", names)
        if self.row_names is not None:
            names = tuple(str(r) for r in self.row_names)
            if len(names) != values.shape[0]:
                raise DimensionError(f"{len(names)} row names for {values.shape[0]} rows")
            object.__setattr__(self, "row_names", names)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def feature_name(self, feature: int) -> str:
        """Display name of a 0-based column: its header, or ``X(j)`` with j 1-based."""
        if self.column_names is not None:
            return self.column_names[feature]
        return f"X({feature + 1})"


def column_scaling(data: Dataset) -> Tuple[np.ndarray, np.ndarray]:
    """Column means and standard deviations (divisor n); zero marks a constant column."""
    if data.n == 0:
        raise EmptyDataset("dataset has no observations")
    return data.values.mean(axis=0), data.values.std(axis=0)


def apply_scaling(x: np.ndarray, mean, std) -> np.ndarray:
    mean = np.asarray(mean, dtype=float)
    std = np.asarray(std, dtype=float)
    scale = np.where(std > 0, std, 1.0)
    return np.where(std > 0, (x - mean) / scale, 0.0)


def standardize_dataset(data: Dataset) -> Dataset:
    """Center every column and scale it to unit variance (divisor n).

    Constant columns become all-zero. Labels and names are carried over.
    """
    mean, std = column_scaling(data)
    return dataclasses.replace(data, values=apply_scaling(data.values, mean, std))


@dataclass(frozen=True)
class SplitRule:
    """Axis-aligned rule: a point goes left iff ``x[feature] <= threshold``.

    ``feature`` is 0-based; serialized forms use 1-based variable numbers.
    """

    feature: int
    threshold: float

    def goes_left(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x)[..., self.feature] <= self.threshold


@dataclass(frozen=True, eq=False)
class TreeNode:
    id: int
    indices: np.ndarray
    deviance: float
    parent: Optional[int] = None
    depth: int = 0
    split: Optional[SplitRule] = None
    left: Optional[int] = None
    right: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "indices", _frozen_array(self.indices, dtype=np.intp))
        if (self.split is None) != (self.left is None) or (self.left is None) != (
            self.right is None
        ):
            raise ValueError("a node has a split iff it has both children")

    @property
    def is_leaf(self) -> bool:
        return self.split is None

    @property
    def size(self) -> int:
        return int(self.indices.size)


@dataclass(frozen=True, eq=False)
class ClusterTree:
    """Binary partition tree over the rows of one dataset.

    ``cluster_map`` maps leaf ids to 1-based cluster labels. Before joining
    every leaf is its own cluster, numbered in left-to-right leaf order.
    """

    nodes: Mapping[int, TreeNode]
    root: int
    stage: str
    n_samples: int
    n_features: int
    cluster_map: Mapping[int, int] = field(default_factory=dict)

    def __post_init__(self):
        if self.stage not in STAGES:
            raise ValueError(f"unknown stage {self.stage!r}")
        object.__setattr__(self, "nodes", dict(self.nodes))
        if not self.cluster_map:
            cmap = {leaf: i + 1 for i, leaf in enumerate(self.leaves())}
            object.__setattr__(self, "cluster_map", cmap)
        else:
            object.__setattr__(self, "cluster_map", dict(self.cluster_map))

    def leaves(self) -> List[int]:
        """Leaf ids in left-to-right order."""
        out = []
        stack = [self.root]
        while stack:
            node = self.nodes[stack.pop()]
            if node.is_leaf:
                out.append(node.id)
            else:
                stack.append(node.right)
                stack.append(node.left)
        return out

    @property
    def n_leaves(self) -> int:
        return len(self.leaves())

    @property
    def n_clusters(self) -> int:
        return len(set(self.cluster_map.values()))

    def leaf_of(self, x: np.ndarray) -> np.ndarray:
        """Route each row of ``x`` from the root to a leaf; returns leaf ids."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.n_features:
            raise DimensionError(
                f"tree was fit on {self.n_features} variables, got {x.shape[1]}"
            )
        out = np.empty(x.shape[0], dtype=int)
        pending = [(self.root, np.arange(x.shape[0]))]
        while pending:
            node_id, rows = pending.pop()
            node = self.nodes[node_id]
            if node.is_leaf:
                out[rows] = node_id
                continue
            mask = node.split.goes_left(x[rows])
            pending.append((node.left, rows[mask]))
            pending.append((node.right, rows[~mask]))
        return out

    def predict(self, x: np.ndarray) -> np.ndarray:
        leaf_ids = self.leaf_of(x)
        return np.array([self.cluster_map[i] for i in leaf_ids], dtype=int)

    def assignments(self) -> np.ndarray:
        """Cluster label of every training row, read from the leaf index sets."""
        out = np.zeros(self.n_samples, dtype=int)
        for leaf in self.leaves():
            out[self.nodes[leaf].indices] = self.cluster_map[leaf]
        return out

    def subtree_labels(self, node_id: int) -> set:
        node = self.nodes[node_id]
        if node.is_leaf:
            return {self.cluster_map[node_id]}
        return self.subtree_labels(node.left) | self.subtree_labels(node.right)

    def simplified(self) -> "ClusterTree":
        """Collapse every subtree whose leaves all carry the same cluster label.

        Routing and assignments are unchanged; only splits that separate
        different clusters survive.
        """
        nodes: Dict[int, TreeNode] = {}
        cmap: Dict[int, int] = {}
        stack = [self.root]
        while stack:
            node = self.nodes[stack.pop()]
            labels = self.subtree_labels(node.id)
            if len(labels) == 1:
                nodes[node.id] = dataclasses.replace(node, split=None, left=None, right=None)
                cmap[node.id] = labels.pop()
            else:
                nodes[node.id] = node
                stack.extend((node.left, node.right))
        return dataclasses.replace(self, nodes=nodes, cluster_map=cmap)

    def to_dict(self) -> dict:
        nodes = []
        for node_id in sorted(self.nodes):
            node = self.nodes[node_id]
            split = None
            if node.split is not None:
                split = {"var": node.split.feature + 1, "threshold": node.split.threshold}
            nodes.append(
                {
                    "id": node.id,
                    "parent": node.parent,
                    "split": split,
                    "left": node.left,
                    "right": node.right,
                    "n": node.size,
                    "deviance": node.deviance,
                    "cluster": self.cluster_map.get(node.id) if node.is_leaf else None,
                    "indices": node.indices.tolist(),
                }
            )
        return {
            "root": self.root,
            "stage": self.stage,
            "n_samples": self.n_samples,
            "n_features": self.n_features,
            "nodes": nodes,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "ClusterTree":
        nodes: Dict[int, TreeNode] = {}
        depth: Dict[int, int] = {}
        raw = {int(n["id"]): n for n in payload["nodes"]}
        for node_id, n in raw.items():
            d, parent = 0, n["parent"]
            while parent is not None:
                d += 1
                parent = raw[parent]["parent"]
            depth[node_id] = d
        cmap = {}
        for node_id, n in raw.items():
            split = None
            if n["split"] is not None:
                split = SplitRule(int(n["split"]["var"]) - 1, float(n["split"]["threshold"]))
            nodes[node_id] = TreeNode(
                id=node_id,
                indices=n.get("indices", []),
                deviance=float(n["deviance"]),
                parent=n["parent"],
                depth=depth[node_id],
                split=split,
                left=n.get("left"),
                right=n.get("right"),
            )
            if split is None and n.get("cluster") is not None:
                cmap[node_id] = int(n["cluster"])
        return cls(
            nodes=nodes,
            root=int(payload["root"]),
            stage=payload["stage"],
            n_samples=int(payload["n_samples"]),
            n_features=int(payload["n_features"]),
            cluster_map=cmap,
        )


@dataclass(frozen=True)
class Params:
    """Tuning knobs for the three stages.

    Exactly one of ``k`` and ``eta_quantile`` drives the joining stage.
    ``min_child_size`` additionally forbids splits producing children smaller
    than ``minsize`` (off by default).
    """

    minsize: int = 1
    mindev: float = 0.8
    mindist: float = 0.0
    delta: float = 0.2
    k: Optional[int] = None
    eta_quantile: Optional[float] = None
    seed: int = 0
    standardize: bool = False
    min_child_size: bool = False

    def __post_init__(self):
        if self.minsize < 1:
            raise ValueError("minsize must be a positive integer")
        if not 0.0 < self.mindev < 1.0:
            raise ValueError("mindev must lie in (0, 1)")
        if self.mindist < 0:
            raise ValueError("mindist must be nonnegative")
        if not 0.0 < self.delta <= 1.0:
            raise ValueError("delta must lie in (0, 1]")
        if (self.k is None) == (self.eta_quantile is None):
            raise ValueError("exactly one of k and eta_quantile must be set")
        if self.k is not None and self.k < 1:
            raise ValueError("k must be a positive integer")
        if self.eta_quantile is not None and not 0.0 < self.eta_quantile < 1.0:
            raise ValueError("eta_quantile must lie in (0, 1)")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True, eq=False)
class ClusterResult:
    assignments: np.ndarray
    tree: ClusterTree
    snapshots: Dict[str, ClusterTree]
    k_found: int
    dissimilarity_trace: List[Tuple[Tuple[int, int], float]]
    eta: Optional[float] = None
    warnings: Tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "assignments": [int(a) for a in self.assignments],
            "k_found": self.k_found,
            "eta": self.eta,
            "stage_leaves": {k: t.n_leaves for k, t in self.snapshots.items()},
            "merges": [
                {"leaf_i": int(a), "leaf_j": int(b), "d": float(d)}
                for (a, b), d in self.dissimilarity_trace
            ],
            "warnings": list(self.warnings),
        }
