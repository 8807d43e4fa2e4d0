"""Classification algorithms used to score class combinations.

Every algorithm goes through ``fit(spec, X, y)`` and the returned object's
``predict(X, seed)``. Labels are 1-based on both sides.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any, Mapping

import numpy as np
from numba import njit

from .partitions import Partition, parse_partition

__all__ = [
    "KINDS",
    "USER_KINDS",
    "ClassifierError",
    "DegenerateClass",
    "DimensionMismatch",
    "ClassifierSpec",
    "TrainedClassifier",
    "fit",
    "predict",
    "softmax",
]

KINDS = ("lda", "soft_lda", "nearest_centroid", "random_forest", "majority", "oracle")
# the oracle sees true labels at predict time, so it is a test instrument only
USER_KINDS = KINDS[:-1]

_DEFAULTS: dict[str, dict[str, Any]] = {
    "lda": {"shrinkage": 1e-6},
    "soft_lda": {"shrinkage": 1e-6},
    "nearest_centroid": {},
    "random_forest": {"n_trees": 100, "max_features": None, "min_samples_split": 2, "bootstrap": True},
    "majority": {},
    "oracle": {"same_distributed": (), "class_probabilities": None},
}


class ClassifierError(ValueError):
    pass


class DegenerateClass(ClassifierError):
    pass


class DimensionMismatch(ClassifierError):
    pass


@dataclass(frozen=True)
class ClassifierSpec:
    kind: str
    params: Mapping[str, Any] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ClassifierError(f"unknown classifier kind {self.kind!r}; choose from {', '.join(KINDS)}")
        unknown = set(self.params) - set(_DEFAULTS[self.kind])
        if unknown:
            raise ClassifierError(f"{self.kind}: unknown parameters {sorted(unknown)}")
        merged = {**_DEFAULTS[self.kind], **dict(self.params)}
        if "shrinkage" in merged and not merged["shrinkage"] >= 0:
            raise ClassifierError("shrinkage must be >= 0")
        if self.kind == "random_forest":
            if int(merged["n_trees"]) < 1:
                raise ClassifierError("n_trees must be >= 1")
            if merged["max_features"] is not None and int(merged["max_features"]) < 1:
                raise ClassifierError("max_features must be >= 1")
            if int(merged["min_samples_split"]) < 2:
                raise ClassifierError("min_samples_split must be >= 2")
        if self.kind == "oracle":
            s = tuple(sorted(int(v) for v in merged["same_distributed"]))
            if len(s) == 1:
                raise ClassifierError("same_distributed needs at least two classes (or none)")
            merged["same_distributed"] = s
            probs = merged["class_probabilities"]
            if probs is not None:
                probs = tuple(float(v) for v in probs)
                if min(probs) < 0 or not math.isclose(sum(probs), 1.0, abs_tol=1e-9):
                    raise ClassifierError("class_probabilities must sum to 1")
                merged["class_probabilities"] = probs
        object.__setattr__(self, "params", MappingProxyType(merged))

    def with_seed(self, seed: int) -> "ClassifierSpec":
        return ClassifierSpec(self.kind, dict(self.params), seed)

    def to_dict(self) -> dict:
        params = {}
        for key, val in self.params.items():
            params[key] = list(val) if isinstance(val, tuple) else val
        return {"kind": self.kind, "params": params, "seed": self.seed}

    @classmethod
    def from_dict(cls, obj: Mapping) -> "ClassifierSpec":
        return cls(obj["kind"], dict(obj.get("params", {})), int(obj.get("seed", 0)))

    def __hash__(self) -> int:
        return hash((self.kind, tuple(sorted((k, repr(v)) for k, v in self.params.items())), self.seed))


# ---------------------------------------------------------------------------
# helpers


def softmax(scores: np.ndarray) -> np.ndarray:
    z = scores - scores.max(axis=1, keepdims=True)
    np.exp(z, out=z)
    z /= z.sum(axis=1, keepdims=True)
    return z


def _draw(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One categorical draw per row of ``probs``; returns 0-based indices."""
    cum = np.cumsum(probs, axis=1)
    u = rng.random(probs.shape[0])[:, None] * cum[:, -1:]
    out = (cum <= u).sum(axis=1)
    return np.minimum(out, probs.shape[1] - 1)


def _class_means(X: np.ndarray, y: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    counts = np.bincount(y, minlength=k + 1)[1:]
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        raise DegenerateClass(f"combined class {int(empty[0]) + 1} has no training points")
    sums = np.zeros((k, X.shape[1]))
    np.add.at(sums, y - 1, X)
    return sums / counts[:, None], counts


# ---------------------------------------------------------------------------
# fitted models


class TrainedClassifier:
    """Fitted predictor. Immutable; ``predict`` never advances hidden state."""

    kind = "base"

    def __init__(self, k: int, d: int):
        self.k = int(k)
        self.d = int(d)

    def _check(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None] if self.d == 1 else X[None, :]
        if X.shape[1] != self.d:
            raise DimensionMismatch(f"expected {self.d} features, got {X.shape[1]}")
        return X

    def predict(self, X, seed: int | None = None, original_labels=None) -> np.ndarray:
        raise NotImplementedError


class _LDA(TrainedClassifier):
    kind = "lda"

    def __init__(self, X, y, k, shrinkage):
        super().__init__(k, X.shape[1])
        means, counts = _class_means(X, y, k)
        # center at the grand mean so a global shift of X cancels exactly
        self.center = X.mean(axis=0)
        resid = X - means[y - 1]
        dof = X.shape[0] - k if X.shape[0] > k else X.shape[0]
        cov = resid.T @ resid / dof
        scale = np.trace(cov) / self.d
        ridge = shrinkage * scale if scale > 0 else max(shrinkage, 1e-12)
        if ridge <= 0:
            ridge = 1e-12 * max(scale, 1.0)
        cov = cov + ridge * np.eye(self.d)
        mc = means - self.center
        chol = np.linalg.cholesky(cov)
        w = np.linalg.solve(chol.T, np.linalg.solve(chol, mc.T))
        self.means = means
        self.coef = w
        self.intercept = -0.5 * np.einsum("kd,dk->k", mc, w) + np.log(counts / counts.sum())
        self.coef.setflags(write=False)
        self.intercept.setflags(write=False)

    def decision_scores(self, X) -> np.ndarray:
        X = self._check(X)
        return (X - self.center) @ self.coef + self.intercept

    def predict(self, X, seed=None, original_labels=None):
        return np.argmax(self.decision_scores(X), axis=1) + 1


class _SoftLDA(_LDA):
    kind = "soft_lda"

    def predict(self, X, seed=None, original_labels=None):
        probs = softmax(self.decision_scores(X))
        rng = np.random.default_rng(0 if seed is None else seed)
        return _draw(probs, rng) + 1


class _NearestCentroid(TrainedClassifier):
    kind = "nearest_centroid"

    def __init__(self, X, y, k):
        super().__init__(k, X.shape[1])
        self.means, _ = _class_means(X, y, k)

    def predict(self, X, seed=None, original_labels=None):
        X = self._check(X)
        d2 = ((X[:, None, :] - self.means[None, :, :]) ** 2).sum(-1)
        return np.argmin(d2, axis=1) + 1


class _Majority(TrainedClassifier):
    kind = "majority"

    def __init__(self, X, y, k):
        super().__init__(k, X.shape[1])
        self.label = int(np.argmax(np.bincount(y, minlength=k + 1)[1:])) + 1

    def predict(self, X, seed=None, original_labels=None):
        X = self._check(X)
        return np.full(X.shape[0], self.label, dtype=np.int64)


class _Oracle(TrainedClassifier):
    """Perfect outside ``same_distributed``; inside it, guesses in proportion to class probabilities."""

    kind = "oracle"

    def __init__(self, X, y, k, partition: Partition, same, probs, original_labels):
        super().__init__(k, X.shape[1])
        if partition is None:
            raise ClassifierError("oracle needs the partition at fit time")
        self.partition = partition
        self.same = tuple(same)
        if probs is None:
            if original_labels is None:
                raise ClassifierError("oracle needs class_probabilities or training original labels")
            cnt = np.bincount(np.asarray(original_labels), minlength=partition.k0 + 1)[1:]
            probs = cnt / cnt.sum()
        probs = np.asarray(probs, dtype=float)
        if probs.shape != (partition.k0,):
            raise ClassifierError("class_probabilities must have one entry per original class")
        self.probs = probs
        if self.same:
            members = np.asarray(self.same)
            w = probs[members - 1]
            if w.sum() <= 0:
                raise ClassifierError("same_distributed classes have zero total probability")
            self.guess_probs = w / w.sum()
            self.guess_targets = partition.map_labels(members)

    def predict(self, X, seed=None, original_labels=None):
        X = self._check(X)
        if original_labels is None:
            raise ClassifierError("oracle needs the original labels at predict time")
        y0 = np.asarray(original_labels)
        out = self.partition.map_labels(y0)
        if self.same:
            hit = np.isin(y0, self.same)
            rng = np.random.default_rng(0 if seed is None else seed)
            pick = rng.choice(len(self.same), size=int(hit.sum()), p=self.guess_probs)
            out = out.copy()
            out[hit] = self.guess_targets[pick]
        return out


# ---------------------------------------------------------------------------
# random forest


@njit(cache=True)
def _grow_tree(X, y, n_classes, sample, mtry, min_split, seed):
    # presorted CART: for every feature f, order[f, lo:hi] holds the node's rows
    # sorted by f, with their values and labels alongside for sequential scans
    m0 = sample.shape[0]
    n_feat = X.shape[1]
    order = np.empty((n_feat, m0), dtype=np.int64)
    vals = np.empty((n_feat, m0))
    labs = np.empty((n_feat, m0), dtype=np.int64)
    col = np.empty(m0)
    for f in range(n_feat):
        for t in range(m0):
            col[t] = X[sample[t], f]
        o = np.argsort(col, kind="mergesort")
        for t in range(m0):
            order[f, t] = o[t]
            vals[f, t] = col[o[t]]
            labs[f, t] = y[sample[o[t]]]

    cap = 2 * m0 + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap, dtype=np.int64)
    np.random.seed(seed)

    stack = np.empty((cap, 3), dtype=np.int64)
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = m0
    top = 1
    n_nodes = 1
    counts = np.zeros(n_classes, dtype=np.int64)
    lc = np.zeros(n_classes, dtype=np.int64)
    feats = np.arange(n_feat)
    goes_left = np.zeros(m0, dtype=np.bool_)
    buf_o = np.empty(m0, dtype=np.int64)
    buf_v = np.empty(m0)
    buf_l = np.empty(m0, dtype=np.int64)
    while top > 0:
        top -= 1
        node = stack[top, 0]
        lo = stack[top, 1]
        hi = stack[top, 2]
        m = hi - lo
        counts[:] = 0
        for t in range(lo, hi):
            counts[labs[0, t]] += 1
        best_c = 0
        for c in range(1, n_classes):
            if counts[c] > counts[best_c]:
                best_c = c
        value[node] = best_c
        if counts[best_c] == m or m < min_split:
            continue

        np.random.shuffle(feats)
        parent_sq = 0.0
        for c in range(n_classes):
            parent_sq += counts[c] * counts[c]
        best_score = -1.0
        best_f = -1
        best_thr = 0.0
        tried = 0
        for fi in range(n_feat):
            # past mtry features, keep looking only if nothing was splittable
            if tried >= mtry and best_f >= 0:
                break
            f = feats[fi]
            tried += 1
            if vals[f, lo] == vals[f, hi - 1]:
                continue
            lc[:] = 0
            lsq = 0.0
            rsq = parent_sq
            for t in range(m - 1):
                c = labs[f, lo + t]
                # incremental sums of squared counts on each side
                lsq += 2 * lc[c] + 1
                lc[c] += 1
                rc = counts[c] - lc[c]
                rsq -= 2 * rc + 1
                a = vals[f, lo + t]
                b = vals[f, lo + t + 1]
                if a == b:
                    continue
                nl = t + 1
                nr = m - nl
                # minimizing weighted gini is maximizing this
                score = lsq / nl + rsq / nr
                if score > best_score:
                    best_score = score
                    best_f = f
                    best_thr = 0.5 * (a + b)
                    if best_thr >= b:
                        best_thr = a
        if best_f < 0:
            continue

        n_left = 0
        for t in range(lo, hi):
            gl = vals[best_f, t] <= best_thr
            goes_left[order[best_f, t]] = gl
            if gl:
                n_left += 1
        mid = lo + n_left
        # stable partition of every feature's ordering
        for f in range(n_feat):
            a = lo
            b = 0
            for t in range(lo, hi):
                r = order[f, t]
                if goes_left[r]:
                    order[f, a] = r
                    vals[f, a] = vals[f, t]
                    labs[f, a] = labs[f, t]
                    a += 1
                else:
                    buf_o[b] = r
                    buf_v[b] = vals[f, t]
                    buf_l[b] = labs[f, t]
                    b += 1
            for t in range(b):
                order[f, mid + t] = buf_o[t]
                vals[f, mid + t] = buf_v[t]
                labs[f, mid + t] = buf_l[t]
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = n_nodes
        right[node] = n_nodes + 1
        stack[top, 0] = n_nodes + 1
        stack[top, 1] = mid
        stack[top, 2] = hi
        top += 1
        stack[top, 0] = n_nodes
        stack[top, 1] = lo
        stack[top, 2] = mid
        top += 1
        n_nodes += 2
    return feature[:n_nodes], threshold[:n_nodes], left[:n_nodes], right[:n_nodes], value[:n_nodes]


@njit(cache=True)
def _grow_forest(X, y, n_classes, n_trees, mtry, min_split, bootstrap, seeds):
    n = X.shape[0]
    offsets = np.zeros(n_trees + 1, dtype=np.int64)
    parts = []
    for t in range(n_trees):
        np.random.seed(seeds[t])
        if bootstrap:
            sample = np.random.randint(0, n, n)
        else:
            sample = np.arange(n)
        tree = _grow_tree(X, y, n_classes, sample, mtry, min_split, seeds[t] + 1)
        parts.append(tree)
        offsets[t + 1] = offsets[t] + tree[0].shape[0]
    total = offsets[n_trees]
    feature = np.empty(total, dtype=np.int64)
    threshold = np.empty(total)
    left = np.empty(total, dtype=np.int64)
    right = np.empty(total, dtype=np.int64)
    value = np.empty(total, dtype=np.int64)
    for t in range(n_trees):
        a = offsets[t]
        b = offsets[t + 1]
        f, th, l, r, v = parts[t]
        feature[a:b] = f
        threshold[a:b] = th
        left[a:b] = l
        right[a:b] = r
        value[a:b] = v
    return offsets, feature, threshold, left, right, value


@njit(cache=True)
def _forest_votes(X, n_classes, offsets, feature, threshold, left, right, value):
    n = X.shape[0]
    votes = np.zeros((n, n_classes), dtype=np.int64)
    for t in range(offsets.shape[0] - 1):
        base = offsets[t]
        for i in range(n):
            node = 0
            while feature[base + node] >= 0:
                if X[i, feature[base + node]] <= threshold[base + node]:
                    node = left[base + node]
                else:
                    node = right[base + node]
            votes[i, value[base + node]] += 1
    return votes


class _RandomForest(TrainedClassifier):
    kind = "random_forest"

    def __init__(self, X, y, k, n_trees, max_features, min_samples_split, bootstrap, seed):
        super().__init__(k, X.shape[1])
        _class_means(X, y, k)  # empty-class check
        mtry = int(max_features) if max_features is not None else math.ceil(math.sqrt(self.d))
        mtry = min(mtry, self.d)
        seeds = np.random.default_rng(seed).integers(0, 2**31 - 2, size=int(n_trees))
        self._trees = _grow_forest(
            np.ascontiguousarray(X), (y - 1).astype(np.int64), k, int(n_trees), mtry,
            int(min_samples_split), bool(bootstrap), seeds,
        )
        self.n_trees = int(n_trees)

    def votes(self, X) -> np.ndarray:
        X = np.ascontiguousarray(self._check(X))
        return _forest_votes(X, self.k, *self._trees)

    def predict(self, X, seed=None, original_labels=None):
        return np.argmax(self.votes(X), axis=1) + 1


# ---------------------------------------------------------------------------


def fit(spec: ClassifierSpec, X, y, k: int | None = None, *, partition=None,
        original_labels=None) -> TrainedClassifier:
    """Fit ``spec`` on features ``X`` and combined labels ``y`` in ``1..k``.

    ``partition`` and ``original_labels`` are only read by the oracle.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=np.int64)
    if y.shape != (X.shape[0],):
        raise DimensionMismatch("features and labels disagree in length")
    if y.size == 0:
        raise DegenerateClass("no training points")
    if y.min() < 1:
        raise ClassifierError("labels must be >= 1")
    k = int(y.max()) if k is None else int(k)
    prm = spec.params
    if spec.kind == "lda":
        return _LDA(X, y, k, prm["shrinkage"])
    if spec.kind == "soft_lda":
        return _SoftLDA(X, y, k, prm["shrinkage"])
    if spec.kind == "nearest_centroid":
        return _NearestCentroid(X, y, k)
    if spec.kind == "majority":
        return _Majority(X, y, k)
    if spec.kind == "random_forest":
        return _RandomForest(X, y, k, prm["n_trees"], prm["max_features"],
                             prm["min_samples_split"], prm["bootstrap"], spec.seed)
    if isinstance(partition, str):
        partition = parse_partition(partition)
    return _Oracle(X, y, k, partition, prm["same_distributed"], prm["class_probabilities"],
                   original_labels)


def predict(clf: TrainedClassifier, X, seed: int | None = None, original_labels=None) -> np.ndarray:
    return clf.predict(X, seed, original_labels)
