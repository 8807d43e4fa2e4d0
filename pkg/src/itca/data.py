"""Datasets, class proportions, stratified folds and the random-walk simulator."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .partitions import Partition, parse_partition

__all__ = [
    "DatasetError",
    "ParseError",
    "NonNumericFeature",
    "SingleClass",
    "TooFewPoints",
    "CenterGenerationTimeout",
    "Dataset",
    "FoldPlan",
    "SimulationConfig",
    "load_csv",
    "write_csv",
    "simulate",
    "simulate_centers",
    "write_simulation",
    "class_proportions",
    "stratified_folds",
    "split_class",
]


class DatasetError(ValueError):
    pass


class ParseError(DatasetError):
    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        super().__init__(message)
        self.row = row
        self.column = column


class NonNumericFeature(ParseError):
    pass


class SingleClass(DatasetError):
    pass


class TooFewPoints(DatasetError):
    pass


class CenterGenerationTimeout(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix ``features`` (n x d) with labels in ``1..k0``."""

    features: np.ndarray
    labels: np.ndarray
    label_names: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        X = np.array(self.features, dtype=float, copy=True)
        y = np.array(self.labels, copy=True)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise DatasetError(f"features must be a nonempty n x d matrix, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise DatasetError("labels must be a length-n vector")
        if not np.all(np.isfinite(X)):
            raise DatasetError("features contain non-finite values")
        if y.size and not np.all(np.equal(np.mod(y, 1), 0)):
            raise DatasetError("labels must be integers")
        y = y.astype(np.int64)
        if y.min() < 1:
            raise DatasetError("labels must be >= 1")
        missing = set(range(1, int(y.max()) + 1)) - set(np.unique(y).tolist())
        if missing:
            raise DatasetError(f"classes {sorted(missing)} have no observations")
        if self.label_names is not None and len(self.label_names) != int(y.max()):
            raise DatasetError("label_names must name every class")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def k0(self) -> int:
        return int(self.labels.max())

    def subset(self, index) -> tuple[np.ndarray, np.ndarray]:
        return self.features[index], self.labels[index]


def class_proportions(ds: Dataset) -> np.ndarray:
    return np.bincount(ds.labels, minlength=ds.k0 + 1)[1:] / ds.n


# ---------------------------------------------------------------------------
# csv


def load_csv(path, label_column: str = "label") -> tuple[Dataset, dict[str, int]]:
    """Read a headed CSV; every column but ``label_column`` must be numeric.

    Raw labels are re-encoded 1..K0 and the mapping is returned. Numeric labels
    keep their numeric order, so ordinal classes stay adjacent; other labels are
    numbered by first appearance.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file", row=0) from None
        header = [h.strip() for h in header]
        if label_column not in header:
            raise ParseError(f"{path}: no column named {label_column!r}", row=1, column=label_column)
        li = header.index(label_column)
        feature_cols = [h for i, h in enumerate(header) if i != li]
        if not feature_cols:
            raise ParseError(f"{path}: no feature columns", row=1)
        rows: list[list[float]] = []
        raw_labels: list[str] = []
        for rownum, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"{path}: row {rownum} has {len(row)} fields, expected {len(header)}",
                    row=rownum,
                )
            values = []
            for i, cell in enumerate(row):
                if i == li:
                    continue
                cell = cell.strip()
                if not cell:
                    raise ParseError(
                        f"{path}: row {rownum}, column {header[i]!r} is empty",
                        row=rownum, column=header[i],
                    )
                try:
                    values.append(float(cell))
                except ValueError:
                    raise NonNumericFeature(
                        f"{path}: row {rownum}, column {header[i]!r}: {cell!r} is not numeric",
                        row=rownum, column=header[i],
                    ) from None
            label = row[li].strip()
            if not label:
                raise ParseError(f"{path}: row {rownum} has an empty label", row=rownum,
                                 column=label_column)
            rows.append(values)
            raw_labels.append(label)
    if not rows:
        raise ParseError(f"{path}: no data rows", row=2)
    distinct = list(dict.fromkeys(raw_labels))
    try:
        distinct.sort(key=float)
    except ValueError:
        pass
    mapping = {lab: i + 1 for i, lab in enumerate(distinct)}
    if len(mapping) < 2:
        raise SingleClass(f"{path}: only one distinct label ({raw_labels[0]!r})")
    ds = Dataset(
        np.asarray(rows, dtype=float),
        np.asarray([mapping[v] for v in raw_labels]),
        label_names=tuple(mapping),
    )
    return ds, mapping


def write_csv(ds: Dataset, path, label_column: str = "label", feature_names: Sequence[str] | None = None):
    """Write ``ds`` with ``repr`` floats so a reload is bit-exact."""
    names = list(feature_names) if feature_names else [f"x{j + 1}" for j in range(ds.d)]
    labels = ds.labels if ds.label_names is None else [ds.label_names[v - 1] for v in ds.labels]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names + [label_column])
        for row, lab in zip(ds.features, labels):
            w.writerow([repr(float(v)) for v in row] + [str(lab)])


# ---------------------------------------------------------------------------
# folds


@dataclass(frozen=True, eq=False)
class FoldPlan:
    """Fold index (0-based, ``0..r-1``) of every observation."""

    r: int
    assignment: np.ndarray
    seed: int

    def eval_index(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == fold)

    def train_index(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment != fold)

    def splits(self):
        for f in range(self.r):
            yield self.train_index(f), self.eval_index(f)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.r)


def stratified_folds(ds: Dataset | np.ndarray, r: int, seed: int) -> FoldPlan:
    """Stratified R-fold plan.

    Points are shuffled within each class, the classes are laid end to end and
    folds are dealt round-robin over that sequence, so both overall and
    per-class fold counts differ by at most one.
    """
    labels = ds.labels if isinstance(ds, Dataset) else np.asarray(ds)
    n = labels.shape[0]
    if r < 2:
        raise ValueError("need at least 2 folds")
    if n < r:
        raise TooFewPoints(f"{n} points cannot fill {r} folds")
    rng = np.random.default_rng(seed)
    order = []
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        order.append(rng.permutation(idx))
    order = np.concatenate(order)
    assignment = np.empty(n, dtype=np.int64)
    assignment[order] = np.arange(n) % r
    assignment.setflags(write=False)
    return FoldPlan(r, assignment, seed)


# ---------------------------------------------------------------------------
# simulation


@dataclass(frozen=True)
class SimulationConfig:
    """Random-walk Gaussian simulation with ambiguous observed labels.

    ``class_probs`` optionally fixes the observed-class probabilities directly
    (used by the two-class region experiments); by default the true class is
    uniform and the observed class is uniform within it.
    """

    true_partition: Partition
    step_length: float = 3.0
    sigma: float = 1.5
    n: int = 2000
    d: int = 5
    seed: int = 0
    class_probs: tuple[float, ...] | None = None
    max_attempts: int = 1000

    def __post_init__(self) -> None:
        if isinstance(self.true_partition, str):
            object.__setattr__(self, "true_partition", parse_partition(self.true_partition))
        if not self.step_length > 0:
            raise ValueError("step_length must be positive")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.n < 1 or self.d < 1:
            raise ValueError("n and d must be positive")
        if self.class_probs is not None:
            probs = tuple(float(p) for p in self.class_probs)
            if len(probs) != self.k0 or min(probs) < 0 or not math.isclose(sum(probs), 1.0, abs_tol=1e-9):
                raise ValueError("class_probs must be a probability vector of length k0")
            object.__setattr__(self, "class_probs", probs)

    @property
    def k0(self) -> int:
        return self.true_partition.k0

    @property
    def k_star(self) -> int:
        return self.true_partition.k

    def to_dict(self) -> dict:
        return {
            "true_partition": str(self.true_partition),
            "step_length": self.step_length,
            "sigma": self.sigma,
            "n": self.n,
            "d": self.d,
            "seed": self.seed,
            "class_probs": list(self.class_probs) if self.class_probs is not None else None,
            "max_attempts": self.max_attempts,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "SimulationConfig":
        known = {"true_partition", "step_length", "sigma", "n", "d", "seed", "class_probs", "max_attempts"}
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown simulation config keys: {sorted(unknown)}")
        kw = dict(obj)
        if kw.get("class_probs") is not None:
            kw["class_probs"] = tuple(kw["class_probs"])
        return cls(**kw)


def _unit_vector(rng: np.random.Generator, d: int) -> np.ndarray:
    while True:
        v = rng.standard_normal(d)
        norm = np.linalg.norm(v)
        if norm > 0:
            return v / norm


def simulate_centers(k_star: int, d: int, step_length: float, sigma: float,
                     rng: np.random.Generator, max_attempts: int = 1000) -> np.ndarray:
    """Random-walk centers from the origin, redrawn until all pairs are > sigma apart."""
    for _ in range(max_attempts):
        centers = np.zeros((k_star, d))
        for k in range(1, k_star):
            centers[k] = centers[k - 1] + step_length * _unit_vector(rng, d)
        if k_star < 2:
            return centers
        diff = centers[:, None, :] - centers[None, :, :]
        dist = np.sqrt((diff**2).sum(-1))
        if dist[np.triu_indices(k_star, 1)].min() > sigma:
            return centers
    raise CenterGenerationTimeout(
        f"no center configuration with separation > {sigma} after {max_attempts} attempts"
    )


def simulate(cfg: SimulationConfig, return_centers: bool = False):
    rng = np.random.default_rng(cfg.seed)
    p = cfg.true_partition
    centers = simulate_centers(p.k, cfg.d, cfg.step_length, cfg.sigma, rng, cfg.max_attempts)
    if cfg.class_probs is None:
        y_true = rng.integers(1, p.k + 1, size=cfg.n)
        groups = p.groups()
        sizes = np.array([len(g) for g in groups])
        pick = np.floor(rng.random(cfg.n) * sizes[y_true - 1]).astype(np.int64)
        lut = np.full((p.k, max(sizes)), -1, dtype=np.int64)
        for k, g in enumerate(groups):
            lut[k, : len(g)] = g
        y = lut[y_true - 1, pick]
    else:
        y = rng.choice(np.arange(1, p.k0 + 1), size=cfg.n, p=np.asarray(cfg.class_probs))
        y_true = p.map_labels(y)
    X = centers[y_true - 1] + cfg.sigma * rng.standard_normal((cfg.n, cfg.d))
    ds = _dataset_allowing_empty(X, y, p.k0)
    return (ds, centers) if return_centers else ds


def _dataset_allowing_empty(X, y, k0) -> Dataset:
    present = np.unique(y)
    if present.size != k0:
        missing = sorted(set(range(1, k0 + 1)) - set(present.tolist()))
        raise DatasetError(
            f"simulation produced no observations of classes {missing}; increase n"
        )
    return Dataset(X, y)


def write_simulation(ds: Dataset, cfg: SimulationConfig, path) -> tuple[Path, Path]:
    """Write the CSV plus a ``.json`` sidecar carrying the config."""
    path = Path(path)
    write_csv(ds, path)
    sidecar = path.with_suffix(path.suffix + ".json")
    meta = {"config": cfg.to_dict(), "true_partition": str(cfg.true_partition),
            "n": ds.n, "d": ds.d, "k0": ds.k0}
    sidecar.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path, sidecar


def split_class(ds: Dataset, label: int, seed: int) -> Dataset:
    """Randomly halve class ``label``; the second half becomes class ``label + 1``.

    Later classes shift up by one, so the result has ``k0 + 1`` classes.
    """
    rng = np.random.default_rng(seed)
    idx = np.flatnonzero(ds.labels == label)
    if idx.size < 2:
        raise DatasetError(f"class {label} has fewer than two points")
    second = rng.permutation(idx)[: idx.size // 2]
    y = ds.labels.copy()
    y[y > label] += 1
    y[second] = label + 1
    names = None
    if ds.label_names is not None:
        base = ds.label_names[label - 1]
        names = (ds.label_names[: label - 1] + (f"{base}_a", f"{base}_b")
                 + ds.label_names[label:])
    return Dataset(ds.features, y, label_names=names)
