"""Dataset CSV and tree JSON/DOT serialization."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Optional

import numpy as np

from .core import ClusterTree, Dataset, ParseError

LABEL_COLUMN = "label"


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def read_dataset_csv(path) -> Dataset:
    """Read a comma-separated numeric table.

    The header row is optional (detected when any cell is non-numeric). A
    final column named ``label`` is taken as ground truth.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise ParseError(f"{path}: no data rows")
    header = None
    if not all(_is_number(c) for c in rows[0]):
        header = [c.strip() for c in rows[0]]
        rows = rows[1:]
        if not rows:
            raise ParseError(f"{path}: header but no data rows")
    width = len(header) if header else len(rows[0])
    values = np.empty((len(rows), width))
    first_line = 2 if header else 1
    for r, row in enumerate(rows):
        if len(row) != width:
            raise ParseError(
                f"{path}:{r + first_line}: expected {width} fields, got {len(row)}",
                row=r + first_line,
            )
        for c, cell in enumerate(row):
            try:
                values[r, c] = float(cell)
            except ValueError:
                col = header[c] if header else str(c + 1)
                raise ParseError(
                    f"{path}:{r + first_line}: column {col!r} is not numeric: {cell!r}",
                    row=r + first_line,
                    column=col,
                ) from None
    labels = None
    names = header
    if header and header[-1].lower() == LABEL_COLUMN:
        labels = values[:, -1]
        values = values[:, :-1]
        names = header[:-1]
    return Dataset(values, labels=labels, column_names=names)


def write_dataset_csv(data: Dataset, path) -> None:
    names = list(data.column_names or (f"x{j + 1}" for j in range(data.p)))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names + ([LABEL_COLUMN] if data.labels is not None else []))
        for i in range(data.n):
            row = [repr(float(v)) for v in data.values[i]]
            if data.labels is not None:
                row.append(str(int(data.labels[i])))
            writer.writerow(row)


def dump_json(payload, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def save_tree(tree: ClusterTree, path, extra: Optional[dict] = None) -> None:
    payload = tree.to_dict()
    if extra:
        payload.update(extra)
    dump_json(payload, path)


def load_tree(path) -> tuple:
    """Return the tree and the raw payload (for fields such as scaling)."""
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    return ClusterTree.from_dict(payload), payload


def export_dot(tree: ClusterTree, feature_names=None) -> str:
    """Graphviz digraph; the left edge of every split is the ``<=`` branch."""

    def name(feature):
        if feature_names is not None:
            return str(feature_names[feature])
        return f"X({feature + 1})"

    lines = ["digraph cubt {", "  node [shape=box, fontname=Helvetica];"]
    for node_id in sorted(tree.nodes):
        node = tree.nodes[node_id]
        if node.is_leaf:
            label = f"cluster {tree.cluster_map[node_id]}\\nn = {node.size}"
            lines.append(f'  n{node_id} [label="{label}", style=rounded];')
        else:
            label = f"{name(node.split.feature)} <= {node.split.threshold:.4g}"
            lines.append(f'  n{node_id} [label="{label}"];')
    for node_id in sorted(tree.nodes):
        node = tree.nodes[node_id]
        if not node.is_leaf:
            lines.append(f'  n{node_id} -> n{node.left} [label="yes"];')
            lines.append(f'  n{node_id} -> n{node.right} [label="no"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
