"""Cross-validated criteria for scoring a class combination.

Every criterion is larger-is-better. Split-level functions take a training
and an evaluation set, each a ``Dataset`` or an ``(X, y)`` pair with the
original labels; ``cv`` averages a split criterion over a fold plan.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .classifiers import ClassifierSpec, fit
from .data import Dataset, FoldPlan
from .partitions import Partition

__all__ = [
    "CRITERIA",
    "CriterionReport",
    "ConditionalAccuracyTable",
    "GaussianMixture",
    "NonPositiveDefinite",
    "CriterionError",
    "derive_seed",
    "split_predictions",
    "score_predictions",
    "itca_split",
    "itca_alt_split",
    "acc_split",
    "mi_split",
    "aac_split",
    "ckl_split",
    "pe_split",
    "cv",
    "Evaluator",
    "gaussian_kl",
    "gaussian_entropy",
    "gmm_kl_bounds",
    "gmm_kl_approx",
    "fit_group_mixture",
    "p_itca",
    "p_pe",
    "conditional_accuracy",
]

CRITERIA = ("itca", "itca_alt", "acc", "mi", "aac_proportion", "aac_cardinality", "ckl", "pe")
DEFAULT_SHRINKAGE = 1e-6


class CriterionError(ValueError):
    pass


class NonPositiveDefinite(CriterionError):
    pass


@dataclass(frozen=True)
class CriterionReport:
    name: str
    per_fold: tuple
    mean: float
    stderr: float

    @classmethod
    def from_values(cls, name: str, values: Sequence[float]) -> "CriterionReport":
        v = np.asarray(values, dtype=float)
        r = v.size
        # identical folds give exactly zero spread
        sd = float(np.std(v, ddof=1)) if r > 1 and np.ptp(v) > 0 else 0.0
        return cls(name, tuple(float(x) for x in v), float(v.mean()), sd / math.sqrt(r))

    def to_dict(self) -> dict:
        return {"name": self.name, "per_fold": list(self.per_fold), "mean": self.mean,
                "stderr": self.stderr}


@dataclass(frozen=True)
class ConditionalAccuracyTable:
    """Per combined class: conditional accuracy and class proportion."""

    accuracy: np.ndarray
    proportion: np.ndarray

    @property
    def k(self) -> int:
        return len(self.accuracy)


# ---------------------------------------------------------------------------
# seeds and predictions


def derive_seed(base_seed: int, partition, fold: int, salt: str = "") -> int:
    """Schedule-independent seed for one (partition, fold) evaluation."""
    text = f"{int(base_seed)}|{partition}|{int(fold)}|{salt}".encode()
    return int.from_bytes(hashlib.blake2b(text, digest_size=8).digest(), "little") >> 1


def _xy(part):
    if isinstance(part, Dataset):
        return part.features, part.labels
    X, y = part
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return X, np.asarray(y, dtype=np.int64)


def split_predictions(train, eval, p: Partition, spec: ClassifierSpec, seed: int | None = None):
    """Fit on the combined training labels and predict the evaluation set."""
    Xt, yt = _xy(train)
    Xe, ye = _xy(eval)
    seed = spec.seed if seed is None else seed
    clf = fit(spec.with_seed(seed), Xt, p.map_labels(yt), p.k, partition=p, original_labels=yt)
    return clf.predict(Xe, seed=seed ^ 0x5F3759DF, original_labels=ye)


def _proportions(y: np.ndarray, k0: int) -> np.ndarray:
    return np.bincount(y, minlength=k0 + 1)[1:] / y.size


def _combined(props: np.ndarray, p: Partition) -> np.ndarray:
    out = np.zeros(p.k)
    if p.k == 1:
        # exactly one combined class; a float sum may land a hair off 1
        out[0] = 1.0
        return out
    np.add.at(out, np.asarray(p.assignment) - 1, props)
    return out


def _xlogx(v):
    v = np.asarray(v, dtype=float)
    out = np.zeros_like(v)
    pos = v > 0
    out[pos] = v[pos] * np.log(v[pos])
    return out


# ---------------------------------------------------------------------------
# scoring predictions


def _itca(yc, pred, P, k):
    n_k = np.bincount(yc, minlength=k + 1)[1:]
    correct = np.bincount(yc[pred == yc], minlength=k + 1)[1:]
    return float(np.sum(-_xlogx(P) * correct / np.maximum(1, n_k)))


def score_predictions(name: str, p: Partition, y_eval, pred, props_full=None, X_eval=None,
                      shrinkage: float = DEFAULT_SHRINKAGE) -> float:
    """Value of criterion ``name`` from evaluation labels and predictions.

    ``props_full`` are the original-class proportions over the whole data;
    when omitted the evaluation proportions stand in.
    """
    y0 = np.asarray(y_eval, dtype=np.int64)
    pred = np.asarray(pred, dtype=np.int64)
    k0, k = p.k0, p.k
    if y0.size == 0:
        raise CriterionError("empty evaluation set")
    yc = p.map_labels(y0)
    props_eval = _proportions(y0, k0)
    props = props_eval if props_full is None else np.asarray(props_full, dtype=float)
    ne = y0.size
    hit = pred == yc
    if name == "itca":
        return _itca(yc, pred, _combined(props, p), k)
    if name == "itca_alt":
        Pe = _combined(props_eval, p)
        return float(np.sum(-np.log(Pe[yc[hit] - 1])) / ne)
    if name == "acc":
        return float(hit.mean())
    if name == "mi":
        table = np.zeros((k, k0))
        np.add.at(table, (pred - 1, y0 - 1), 1.0)
        joint = table / ne
        outer = joint.sum(1, keepdims=True) * joint.sum(0, keepdims=True)
        nz = joint > 0
        return float(np.sum(joint[nz] * np.log(joint[nz] / outer[nz])))
    if name == "aac_proportion":
        P = _combined(props, p)
        return float(np.sum(1.0 / P[yc[hit] - 1]) / ne)
    if name == "aac_cardinality":
        sizes = np.bincount(p.assignment, minlength=k + 1)[1:]
        return float(np.sum(1.0 / sizes[yc[hit] - 1]) / ne)
    if name == "pe":
        q = np.bincount(yc[hit], minlength=k + 1)[1:] / ne
        return float(-np.sum(_xlogx(q)))
    if name == "ckl":
        if X_eval is None:
            raise CriterionError("ckl needs the evaluation features")
        X = np.asarray(X_eval, dtype=float)
        fallback = _total_scale(X)
        f_orig = fit_group_mixture(X, y0, k0, shrinkage, fallback)
        f_comb = fit_group_mixture(X, yc, k, shrinkage, fallback)
        f_pred = fit_group_mixture(X, pred, k, shrinkage, fallback)
        return gmm_kl_approx(f_comb, f_orig) + gmm_kl_approx(f_pred, f_comb)
    raise CriterionError(f"unknown criterion {name!r}; choose from {', '.join(CRITERIA)}")


def _split(name, train, eval, p, spec, seed, proportions="full", **kw):
    Xt, yt = _xy(train)
    Xe, ye = _xy(eval)
    pred = split_predictions((Xt, yt), (Xe, ye), p, spec, seed)
    if proportions == "full":
        props = _proportions(np.concatenate([yt, ye]), p.k0)
    elif proportions == "eval":
        props = None
    else:
        raise CriterionError("proportions must be 'full' or 'eval'")
    return score_predictions(name, p, ye, pred, props, Xe, **kw)


def itca_split(train, eval, p, spec, seed=None, proportions="full") -> float:
    """Entropy-weighted class-conditional accuracy on one split."""
    return _split("itca", train, eval, p, spec, seed, proportions)


def itca_alt_split(train, eval, p, spec, seed=None) -> float:
    return _split("itca_alt", train, eval, p, spec, seed)


def acc_split(train, eval, p, spec, seed=None) -> float:
    return _split("acc", train, eval, p, spec, seed)


def mi_split(train, eval, p, spec, seed=None) -> float:
    """MI between predicted combined labels and the original labels."""
    return _split("mi", train, eval, p, spec, seed)


def aac_split(train, eval, p, spec, variant: str = "proportion", seed=None) -> float:
    if variant not in ("proportion", "cardinality"):
        raise CriterionError("variant must be 'proportion' or 'cardinality'")
    return _split(f"aac_{variant}", train, eval, p, spec, seed)


def ckl_split(train, eval, p, spec, seed=None, shrinkage=DEFAULT_SHRINKAGE) -> float:
    return _split("ckl", train, eval, p, spec, seed, shrinkage=shrinkage)


def pe_split(train, eval, p, spec, seed=None) -> float:
    return _split("pe", train, eval, p, spec, seed)


# ---------------------------------------------------------------------------
# cross-validation


class Evaluator:
    """Out-of-fold predictions per partition, cached so criteria share fits."""

    def __init__(self, ds: Dataset, spec: ClassifierSpec, folds: FoldPlan, base_seed: int = 0,
                 proportions: str = "full", shrinkage: float = DEFAULT_SHRINKAGE):
        if folds.assignment.shape[0] != ds.n:
            raise CriterionError("fold plan does not match the dataset")
        if proportions not in ("full", "eval"):
            raise CriterionError("proportions must be 'full' or 'eval'")
        self.ds = ds
        self.spec = spec
        self.folds = folds
        self.base_seed = int(base_seed)
        self.proportions = proportions
        self.shrinkage = shrinkage
        self.props = _proportions(ds.labels, ds.k0)
        self._splits = list(folds.splits())
        self._pred: dict[Partition, np.ndarray] = {}
        self.fits = 0

    def predictions(self, p: Partition) -> np.ndarray:
        """Out-of-fold predicted combined label of every observation."""
        if p.k0 != self.ds.k0:
            raise CriterionError(f"partition has {p.k0} classes, data has {self.ds.k0}")
        cached = self._pred.get(p)
        if cached is not None:
            return cached
        out = np.zeros(self.ds.n, dtype=np.int64)
        X, y = self.ds.features, self.ds.labels
        for r, (tr, ev) in enumerate(self._splits):
            seed = derive_seed(self.base_seed, p, r)
            try:
                out[ev] = split_predictions((X[tr], y[tr]), (X[ev], y[ev]), p, self.spec, seed)
            except Exception as exc:
                if exc.args:
                    exc.args = (f"{p}, fold {r}: {exc.args[0]}",) + exc.args[1:]
                raise
            self.fits += 1
        out.setflags(write=False)
        self._pred[p] = out
        return out

    def per_fold(self, name: str, p: Partition) -> list[float]:
        pred = self.predictions(p)
        X, y = self.ds.features, self.ds.labels
        props = self.props if self.proportions == "full" else None
        vals = []
        for r, (_, ev) in enumerate(self._splits):
            try:
                vals.append(score_predictions(name, p, y[ev], pred[ev], props, X[ev],
                                              shrinkage=self.shrinkage))
            except CriterionError as exc:
                raise CriterionError(f"fold {r}: {exc}") from exc
        return vals

    def report(self, name: str, p: Partition) -> CriterionReport:
        return CriterionReport.from_values(name, self.per_fold(name, p))

    def conditional_accuracy(self, p: Partition) -> ConditionalAccuracyTable:
        """Fold-averaged conditional accuracy per combined class, proportions over all data."""
        pred = self.predictions(p)
        yc = p.map_labels(self.ds.labels)
        accs = np.zeros((self.folds.r, p.k))
        for r, (_, ev) in enumerate(self._splits):
            n_k = np.bincount(yc[ev], minlength=p.k + 1)[1:]
            good = np.bincount(yc[ev][pred[ev] == yc[ev]], minlength=p.k + 1)[1:]
            accs[r] = good / np.maximum(1, n_k)
        return ConditionalAccuracyTable(accs.mean(axis=0), _combined(self.props, p))


def cv(name: str, ds: Dataset, p: Partition, spec: ClassifierSpec, folds: FoldPlan,
       base_seed: int = 0, proportions: str = "full") -> CriterionReport:
    if name not in CRITERIA:
        raise CriterionError(f"unknown criterion {name!r}; choose from {', '.join(CRITERIA)}")
    return Evaluator(ds, spec, folds, base_seed, proportions).report(name, p)


def conditional_accuracy(y_eval, pred, p: Partition, props_full=None) -> ConditionalAccuracyTable:
    y0 = np.asarray(y_eval, dtype=np.int64)
    yc = p.map_labels(y0)
    pred = np.asarray(pred)
    n_k = np.bincount(yc, minlength=p.k + 1)[1:]
    good = np.bincount(yc[pred == yc], minlength=p.k + 1)[1:]
    props = _proportions(y0, p.k0) if props_full is None else np.asarray(props_full, dtype=float)
    return ConditionalAccuracyTable(good / np.maximum(1, n_k), _combined(props, p))


# ---------------------------------------------------------------------------
# Gaussian mixtures


@dataclass(frozen=True, eq=False)
class GaussianMixture:
    weights: np.ndarray
    means: np.ndarray
    covs: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=float)
        mu = np.atleast_2d(np.asarray(self.means, dtype=float))
        cov = np.asarray(self.covs, dtype=float)
        if cov.ndim == 2:
            cov = cov[None]
        if not (w.shape[0] == mu.shape[0] == cov.shape[0]):
            raise CriterionError("mixture weights, means and covariances disagree")
        if cov.shape[1:] != (mu.shape[1], mu.shape[1]):
            raise CriterionError("covariance shape does not match dimension")
        if np.any(w < 0) or not math.isclose(w.sum(), 1.0, abs_tol=1e-9):
            raise CriterionError("mixture weights must be a probability vector")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "covs", cov)

    @property
    def d(self) -> int:
        return self.means.shape[1]


def _total_scale(X: np.ndarray) -> float:
    if X.shape[0] < 2:
        return 1.0
    s = float(np.trace(np.atleast_2d(np.cov(X, rowvar=False)))) / X.shape[1]
    return s if s > 0 else 1.0


def fit_group_mixture(X, labels, k: int, shrinkage: float = DEFAULT_SHRINKAGE,
                      fallback_scale: float | None = None) -> GaussianMixture:
    """One Gaussian per label value present; weights are group proportions.

    Covariances get the LDA-style ridge ``shrinkage * tr/d``; groups with no
    spread of their own borrow the overall scale.
    """
    X = np.asarray(X, dtype=float)
    labels = np.asarray(labels)
    d = X.shape[1]
    if fallback_scale is None:
        fallback_scale = _total_scale(X)
    w, mus, covs = [], [], []
    for c in range(1, k + 1):
        rows = X[labels == c]
        if rows.shape[0] == 0:
            continue
        mu = rows.mean(axis=0)
        if rows.shape[0] > 1:
            cov = np.atleast_2d(np.cov(rows, rowvar=False))
        else:
            cov = np.zeros((d, d))
        scale = np.trace(cov) / d
        ridge = shrinkage * (scale if scale > 0 else fallback_scale)
        if ridge <= 0:
            ridge = 1e-12 * fallback_scale
        w.append(rows.shape[0])
        mus.append(mu)
        covs.append(cov + ridge * np.eye(d))
    w = np.asarray(w, dtype=float)
    return GaussianMixture(w / w.sum(), np.asarray(mus), np.asarray(covs))


def _chol(cov):
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise NonPositiveDefinite("covariance is not positive definite") from None


def _logdet(chol) -> float:
    return 2.0 * float(np.sum(np.log(np.diag(chol))))


def gaussian_kl(mu1, cov1, mu2, cov2) -> float:
    """KL(N(mu1, cov1) || N(mu2, cov2))."""
    mu1, mu2 = np.atleast_1d(mu1).astype(float), np.atleast_1d(mu2).astype(float)
    cov1, cov2 = np.atleast_2d(cov1).astype(float), np.atleast_2d(cov2).astype(float)
    d = mu1.size
    L1, L2 = _chol(cov1), _chol(cov2)
    a = np.linalg.solve(L2, L1)
    diff = np.linalg.solve(L2, mu1 - mu2)
    return 0.5 * (_logdet(L2) - _logdet(L1) + float(np.sum(a * a)) + float(diff @ diff) - d)


def gaussian_entropy(cov) -> float:
    cov = np.atleast_2d(cov)
    d = cov.shape[0]
    return 0.5 * (d * math.log(2 * math.pi * math.e) + _logdet(_chol(cov)))


def _log_overlap(mu1, cov1, mu2, cov2) -> float:
    """log of the integral of the product of two Gaussian densities."""
    d = mu1.size
    L = _chol(cov1 + cov2)
    diff = np.linalg.solve(L, mu2 - mu1)
    return -0.5 * (d * math.log(2 * math.pi) + _logdet(L) + float(diff @ diff))


def _logsumexp(a: np.ndarray, b: np.ndarray) -> float:
    """log sum_j b_j exp(a_j) over b_j > 0."""
    keep = b > 0
    a, b = a[keep], b[keep]
    m = a.max()
    return float(m + math.log(np.sum(b * np.exp(a - m))))


def gmm_kl_bounds(f: GaussianMixture, g: GaussianMixture) -> tuple[float, float]:
    """(lower, upper) bracket of KL(f || g) from product-of-Gaussians terms."""
    if f.d != g.d:
        raise CriterionError("mixtures live in different dimensions")
    K, J = len(f.weights), len(g.weights)
    kl_ff = np.array([[gaussian_kl(f.means[i], f.covs[i], f.means[l], f.covs[l]) for l in range(K)]
                      for i in range(K)])
    kl_fg = np.array([[gaussian_kl(f.means[i], f.covs[i], g.means[j], g.covs[j]) for j in range(J)]
                      for i in range(K)])
    lt_ff = np.array([[_log_overlap(f.means[i], f.covs[i], f.means[l], f.covs[l]) for l in range(K)]
                      for i in range(K)])
    lt_fg = np.array([[_log_overlap(f.means[i], f.covs[i], g.means[j], g.covs[j]) for j in range(J)]
                      for i in range(K)])
    ent = np.array([gaussian_entropy(c) for c in f.covs])
    lower = upper = 0.0
    for i in range(K):
        pi = f.weights[i]
        if pi == 0:
            continue
        lower += pi * (_logsumexp(-kl_ff[i], f.weights) - _logsumexp(lt_fg[i], g.weights) - ent[i])
        upper += pi * (_logsumexp(lt_ff[i], f.weights) - _logsumexp(-kl_fg[i], g.weights) + ent[i])
    return lower, upper


def gmm_kl_approx(f: GaussianMixture, g: GaussianMixture) -> float:
    lower, upper = gmm_kl_bounds(f, g)
    return 0.5 * (lower + upper)


# ---------------------------------------------------------------------------
# population level


def p_itca(class_probs, conditional_accuracies) -> float:
    p = np.asarray(class_probs, dtype=float)
    a = np.asarray(conditional_accuracies, dtype=float)
    return float(np.sum(-_xlogx(p) * a))


def p_pe(joint_correct_probs) -> float:
    return float(-np.sum(_xlogx(joint_correct_probs)))
