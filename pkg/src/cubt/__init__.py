"""Interpretable clustering with unsupervised binary trees."""

from .backward import (
    DissimilarityTable,
    dissimilarity_table,
    eta_from_quantile,
    join,
    join_leaves,
    leaf_dissimilarity,
    prune,
)
from .baseline import KMeansModel, kmeans, kmeans_multi
from .core import (
    ClusterResult,
    ClusterTree,
    CubtError,
    Dataset,
    Params,
    SplitRule,
    TreeNode,
    standardize_dataset,
)
from .datagen import ModelSpec, generate, generate_cart_comparison, load_european_jobs
from .evaluation import confusion_matrix, mce, recovered_k_tally
from .grow import best_split, grow_maximal_tree, mindev_fallback, node_deviance
from .pipeline import fit_cubt

__version__ = "0.1.0"
