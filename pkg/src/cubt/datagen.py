"""Seeded simulation models and the European employment data set."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .core import Dataset, DimensionError, ParseError, CubtError


class UnknownModel(CubtError):
    pass


class BadSigma(CubtError):
    pass


MODELS = ("M1", "M2", "M3", "M4", "CARTCMP")

# Grids used when reproducing the simulation tables.
SIGMA_GRID = {
    "M1": (0.11, 0.13, 0.15, 0.17, 0.19),
    "M2": (0.7, 0.75, 0.8, 0.85, 0.9),
    "M4": (0.03, 0.05),
}
DEFAULT_COUNT = {"M1": 100, "M2": 30, "M3": 150, "M4": 25, "CARTCMP": 100}
TRUE_K = {"M1": 4, "M2": 10, "M3": 2, "M4": 3, "CARTCMP": 3}

RING_RADII = ((50.0, 80.0), (200.0, 230.0))

EURO_SECTORS = ("A", "M", "MA", "P", "C", "SI", "F", "S", "T")


@dataclass(frozen=True)
class ModelSpec:
    model: str
    sigma: Optional[float] = None
    count: Optional[int] = None
    seed: int = 0

    @property
    def per_group(self) -> int:
        return self.count if self.count is not None else DEFAULT_COUNT[self.model]


def model_centers(model: str) -> np.ndarray:
    if model == "M1":
        return np.array([[-1.0, 0.0], [1.0, 0.0], [0.0, -1.0], [0.0, 1.0]])
    if model == "M2":
        eye = np.eye(5)
        return np.vstack([eye, -eye])
    if model == "M4":
        return np.vstack([np.full(50, 0.1), np.zeros(50), np.full(50, -0.1)])
    raise UnknownModel(f"{model!r} has no Gaussian centers")


def _gaussian_groups(rng, centers, sigma, count):
    blocks = [c + sigma * rng.standard_normal((count, centers.shape[1])) for c in centers]
    labels = np.repeat(np.arange(1, len(centers) + 1), count)
    return np.vstack(blocks), labels


def _rings(rng, count):
    blocks = []
    for lo, hi in RING_RADII:
        angle = rng.uniform(0.0, 2.0 * np.pi, count)
        radius = rng.uniform(lo, hi, count)
        blocks.append(np.column_stack([radius * np.cos(angle), radius * np.sin(angle)]))
    return np.vstack(blocks), np.repeat([1, 2], count)


def generate(spec: ModelSpec) -> Dataset:
    """Draw one labelled sample; groups appear in order, ``count`` rows each."""
    if spec.model not in MODELS:
        raise UnknownModel(f"unknown model {spec.model!r}; expected one of {MODELS}")
    if spec.per_group < 1:
        raise ValueError("per-group count must be positive")
    rng = np.random.default_rng(spec.seed)
    if spec.model == "CARTCMP":
        return generate_cart_comparison(spec.seed, spec.per_group)
    if spec.model == "M3":
        x, y = _rings(rng, spec.per_group)
        return Dataset(x, labels=y)
    if spec.sigma is None or not spec.sigma > 0 or not np.isfinite(spec.sigma):
        raise BadSigma(f"{spec.model} needs a positive sigma, got {spec.sigma!r}")
    x, y = _gaussian_groups(rng, model_centers(spec.model), spec.sigma, spec.per_group)
    return Dataset(x, labels=y)


# (mean, variance) per coordinate for the three groups, before rotation.
CART_COMPARISON_LAWS = (
    ((0.0, 0.03), (0.0, 0.25)),
    ((2.0, 0.03), (1.0, 0.25)),
    ((1.0, 0.25), (2.5, 0.03)),
)


def rotation(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def generate_cart_comparison(seed: int, count: int = 100) -> Dataset:
    """Three axis-aligned bivariate normals rotated by pi/4 about the origin."""
    rng = np.random.default_rng(seed)
    blocks = []
    for laws in CART_COMPARISON_LAWS:
        cols = [mean + np.sqrt(var) * rng.standard_normal(count) for mean, var in laws]
        blocks.append(np.column_stack(cols))
    x = np.vstack(blocks) @ rotation(np.pi / 4).T
    return Dataset(x, labels=np.repeat([1, 2, 3], count))


def european_jobs_path() -> Path:
    return Path(str(resources.files("cubt") / "data" / "european_jobs.csv"))


def load_european_jobs(path=None) -> Dataset:
    """Read the 1979 employment-by-sector table: a country column plus 9 sectors."""
    path = Path(path) if path is not None else european_jobs_path()
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError(f"{path}: file is empty")
    header, body = rows[0], [r for r in rows[1:] if r]
    if len(header) - 1 != len(EURO_SECTORS):
        raise DimensionError(
            f"{path}: expected a country column and {len(EURO_SECTORS)} sectors, "
            f"got {len(header)} columns"
        )
    names, values = [], []
    for lineno, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise DimensionError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        names.append(row[0].strip())
        parsed = []
        for col, cell in zip(header[1:], row[1:]):
            try:
                parsed.append(float(cell))
            except ValueError:
                raise ParseError(
                    f"{path}:{lineno}: column {col.strip()!r} is not numeric: {cell!r}",
                    row=lineno,
                    column=col.strip(),
                ) from None
        values.append(parsed)
    return Dataset(
        np.array(values),
        column_names=tuple(h.strip() for h in header[1:]),
        row_names=tuple(names),
    )
