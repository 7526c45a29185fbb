"""Grow, prune and join in one call."""

from __future__ import annotations

import warnings

from .backward import join_leaves, prune
from .core import ClusterResult, Dataset, Params, standardize_dataset
from .grow import FallbackExhausted, grow_maximal_tree, mindev_fallback


def fit_cubt(data: Dataset, params: Params) -> ClusterResult:
    """Run the full three-stage procedure on ``data``.

    With a known ``k`` the maximal tree is regrown with smaller ``mindev``
    values when it has fewer than k leaves.
    """
    if params.standardize:
        data = standardize_dataset(data)
    caught = []
    if params.k is not None:
        with warnings.catch_warnings(record=True) as record:
            warnings.simplefilter("always", FallbackExhausted)
            maximal = mindev_fallback(data, params, params.k)
        caught = [str(w.message) for w in record if issubclass(w.category, FallbackExhausted)]
    else:
        maximal = grow_maximal_tree(data, params)
    pruned = prune(maximal, data, params)
    outcome = join_leaves(pruned, data, params)
    tree = outcome.tree
    return ClusterResult(
        assignments=tree.assignments(),
        tree=tree,
        snapshots={"maximal": maximal, "pruned": pruned, "joined": tree},
        k_found=tree.n_clusters,
        dissimilarity_trace=outcome.trace,
        eta=outcome.eta,
        warnings=tuple(caught),
    )
