"""Population ITCA for two same-distributed classes, closed form and simulated.

Setting: three observed classes with probabilities ``p1, p2, p3 = 1 - p1 - p2``.
Classes 1 and 2 share one feature distribution; class 3 sits elsewhere. The
quantity of interest is the change in ITCA when classes 1 and 2 are merged,
positive meaning the merge is preferred.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import ndtr

from .classifiers import ClassifierSpec, fit
from .criteria import Evaluator, derive_seed
from .data import Dataset, SimulationConfig, simulate, stratified_folds
from .partitions import Partition, parse_partition

__all__ = [
    "OutOfOmega",
    "RegionGrid",
    "normal_cdf",
    "oracle_delta",
    "oracle_cr_statistic",
    "lda_delta",
    "region_grid",
    "empirical_delta",
    "oracle_monte_carlo",
    "prediction_frequencies",
    "REGION_DOMAIN",
]

MERGED = parse_partition("{(1,2),3}")
IDENTITY3 = Partition.identity(3)
# bounds used for the simulated grids: lo <= p1, p2 <= hi and p1 + p2 <= total
REGION_DOMAIN = (0.1, 0.7, 0.8)


class OutOfOmega(ValueError):
    pass


def _check(p1: float, p2: float) -> None:
    if not (p1 > 0 and p2 > 0 and p1 + p2 < 1):
        raise OutOfOmega(f"({p1}, {p2}) is outside p1, p2 > 0, p1 + p2 < 1")


def normal_cdf(z):
    """Standard normal CDF."""
    return ndtr(z)


def _xlogx(v: float) -> float:
    return v * math.log(v) if v > 0 else 0.0


def oracle_cr_statistic(p1: float, p2: float) -> float:
    """p1^2 log p1 + p2^2 log p2 - s^2 log s; same sign as the oracle's gain."""
    _check(p1, p2)
    s = p1 + p2
    return p1 * _xlogx(p1) + p2 * _xlogx(p2) - s * _xlogx(s)


def oracle_delta(p1: float, p2: float) -> float:
    """Gain in population ITCA from merging classes 1 and 2 under the oracle.

    Unmerged, the oracle is right on class k in {1, 2} with probability p_k/s;
    merged, it is always right, so the gain is the curve statistic over s.
    """
    return oracle_cr_statistic(p1, p2) / (p1 + p2)


def lda_delta(p1: float, p2: float, separation: float = math.inf, limit: bool = False) -> float:
    """Gain in population ITCA from merging classes 1 and 2 under LDA.

    Classes 1 and 2 share N(0, s^2 I) and class 3 is N(mu, s^2 I) with
    ``separation = |mu| / s``. Unmerged, LDA only ever predicts the larger of
    classes 1 and 2, so the smaller one scores nothing.
    """
    _check(p1, p2)
    s = p1 + p2
    p3 = 1.0 - s
    m = max(p1, p2)
    if limit or math.isinf(separation):
        return _xlogx(m) - _xlogx(s)
    if not separation > 0:
        raise ValueError("separation must be positive")
    a = separation / 2.0
    b = 1.0 / separation
    ls, lm = math.log(s / p3), math.log(m / p3)
    merged = -normal_cdf(a + b * ls) * _xlogx(s) - normal_cdf(a - b * ls) * _xlogx(p3)
    split = -normal_cdf(a + b * lm) * _xlogx(m) - normal_cdf(a - b * lm) * _xlogx(p3)
    return float(merged - split)


# ---------------------------------------------------------------------------
# grids


@dataclass(frozen=True, eq=False)
class RegionGrid:
    algorithm: str
    p1: np.ndarray
    p2: np.ndarray
    values: np.ndarray
    stderr: np.ndarray | None
    resolution: int
    domain: str

    @property
    def area_fraction(self) -> float:
        # points exactly on the curve belong to neither side
        return float(np.mean(self.values > 0)) if self.values.size else 0.0

    def write_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            header = ["p1", "p2", "delta"] + (["stderr"] if self.stderr is not None else [])
            w.writerow(header)
            for i in range(self.values.size):
                row = [repr(float(self.p1[i])), repr(float(self.p2[i])), repr(float(self.values[i]))]
                if self.stderr is not None:
                    row.append(repr(float(self.stderr[i])))
                w.writerow(row)
        return path


def _points(resolution: int, domain: str):
    if domain == "omega":
        if resolution < 1:
            raise ValueError("resolution must be positive")
        c = (np.arange(resolution) + 0.5) / resolution
        P1, P2 = np.meshgrid(c, c, indexing="ij")
        keep = P1 + P2 < 1 - 1e-12
    elif domain == "restricted":
        if resolution < 2:
            raise ValueError("restricted grids need at least 2 points per axis")
        lo, hi, total = REGION_DOMAIN
        c = np.linspace(lo, hi, resolution)
        P1, P2 = np.meshgrid(c, c, indexing="ij")
        keep = P1 + P2 <= total + 1e-9
    else:
        raise ValueError("domain must be 'omega' or 'restricted'")
    return P1[keep], P2[keep]


def region_grid(algorithm: str = "oracle", resolution: int = 100, domain: str = "omega", *,
                separation: float = 10.0, classifier: ClassifierSpec | None = None,
                sim: dict | None = None, folds: int = 5, seed: int = 0,
                progress=None) -> RegionGrid:
    """Sign map of the merge gain over a grid of (p1, p2).

    ``algorithm`` is ``oracle``, ``lda_limit``, ``lda`` (uses ``separation``)
    or ``empirical`` (simulates every cell and runs CV with ``classifier``).
    """
    p1, p2 = _points(resolution, domain)
    stderr = None
    if algorithm == "oracle":
        vals = np.array([oracle_delta(a, b) for a, b in zip(p1, p2)])
    elif algorithm == "lda_limit":
        vals = np.array([lda_delta(a, b, limit=True) for a, b in zip(p1, p2)])
    elif algorithm == "lda":
        vals = np.array([lda_delta(a, b, separation) for a, b in zip(p1, p2)])
    elif algorithm == "empirical":
        if classifier is None:
            raise ValueError("empirical grids need a classifier spec")
        vals = np.empty(p1.size)
        stderr = np.empty(p1.size)
        for i, (a, b) in enumerate(zip(p1, p2)):
            vals[i], stderr[i] = empirical_delta(a, b, classifier, sim=sim, folds=folds, seed=seed)
            if progress is not None:
                progress(i + 1, p1.size)
        algorithm = f"empirical:{classifier.kind}"
    else:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    return RegionGrid(algorithm, p1, p2, vals, stderr, resolution, domain)


_SIM_DEFAULTS = {"step_length": 5.0, "sigma": 1.5, "n": 5000, "d": 5}


def _cell_config(p1, p2, sim, seed) -> SimulationConfig:
    kw = {**_SIM_DEFAULTS, **(sim or {})}
    cell_seed = derive_seed(seed, f"{p1:.9f},{p2:.9f}", 0, "cell")
    return SimulationConfig(MERGED, class_probs=(p1, p2, 1.0 - p1 - p2), seed=cell_seed, **kw)


def empirical_delta(p1: float, p2: float, classifier: ClassifierSpec, *, sim: dict | None = None,
                    folds: int = 5, seed: int = 0) -> tuple[float, float]:
    """Simulated CV-ITCA gain from merging classes 1 and 2, with its fold stderr."""
    _check(p1, p2)
    cfg = _cell_config(p1, p2, sim, seed)
    ds = simulate(cfg)
    if classifier.kind == "oracle":
        classifier = ClassifierSpec("oracle", {"same_distributed": (1, 2),
                                               "class_probabilities": cfg.class_probs},
                                    classifier.seed)
    ev = Evaluator(ds, classifier, stratified_folds(ds, folds, cfg.seed), cfg.seed)
    diff = np.asarray(ev.per_fold("itca", MERGED)) - np.asarray(ev.per_fold("itca", IDENTITY3))
    return float(diff.mean()), float(diff.std(ddof=1) / math.sqrt(diff.size))


def oracle_monte_carlo(p1: float, p2: float, n: int = 100_000, replicates: int = 4,
                       folds: int = 5, seed: int = 0) -> tuple[float, float]:
    """Mean and Monte-Carlo stderr of the oracle's simulated CV-ITCA gain.

    Every fold of every replicate is an independent evaluation set, so the
    stderr is taken over all ``replicates * folds`` values.
    """
    _check(p1, p2)
    vals = []
    for r in range(replicates):
        cfg = _cell_config(p1, p2, {"n": n}, derive_seed(seed, "oracle-mc", r))
        ds = simulate(cfg)
        spec = ClassifierSpec("oracle", {"same_distributed": (1, 2),
                                         "class_probabilities": cfg.class_probs}, r)
        ev = Evaluator(ds, spec, stratified_folds(ds, folds, cfg.seed), cfg.seed)
        vals.extend(np.asarray(ev.per_fold("itca", MERGED))
                    - np.asarray(ev.per_fold("itca", IDENTITY3)))
    vals = np.asarray(vals)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(vals.size))


def prediction_frequencies(classifier: ClassifierSpec, class_probs=(0.3, 0.2, 0.5),
                           separation: float = 10.0, sigma: float = 1.5, n: int = 20_000,
                           d: int = 5, seed: int = 0) -> np.ndarray:
    """Row k0: frequency of each predicted class among test points of class k0.

    Classes 1 and 2 share a Gaussian; class 3 is ``separation`` sigmas away.
    One simulated sample of size ``2n`` is split in half: the classifier is
    trained on the first half with the identity labelling and scored on the second.
    """
    cfg = SimulationConfig(MERGED, sigma=sigma, n=2 * n, d=d, step_length=separation * sigma,
                           class_probs=tuple(class_probs), seed=derive_seed(seed, "freq", 0))
    ds = simulate(cfg)
    half = np.arange(ds.n) < n
    train = Dataset(ds.features[half], ds.labels[half])
    test = Dataset(ds.features[~half], ds.labels[~half])
    if classifier.kind == "oracle":
        classifier = ClassifierSpec("oracle", {"same_distributed": (1, 2),
                                               "class_probabilities": tuple(class_probs)},
                                    classifier.seed)
    clf = fit(classifier, train.features, train.labels, 3, partition=IDENTITY3,
              original_labels=train.labels)
    pred = clf.predict(test.features, seed=derive_seed(seed, "predict", 0),
                       original_labels=test.labels)
    freq = np.zeros((3, 3))
    np.add.at(freq, (test.labels - 1, pred - 1), 1.0)
    return freq / freq.sum(axis=1, keepdims=True)
